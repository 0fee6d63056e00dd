"""Event and label types shared by every part of the toolkit.

Events are kept in packed numpy record arrays rather than lists of objects;
single records are handed out as `Event` tuples when a stream is indexed or
iterated. Labels follow the same pattern with `LabelSample`."""

from typing import NamedTuple
import zlib

import numpy as np

from .constants import default_width, default_height, label_period_us, coverage_gap_us


# one record of a packed event file, see evfile.py
event_dtype = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])
label_dtype = np.dtype([("x", "<f8"), ("y", "<f8"), ("close", "u1")])


class EvtkError(Exception):
    """Base class of all errors raised by the toolkit."""


class FormatError(EvtkError, ValueError):
    """Malformed file content; `line` or `offset` tells where."""

    def __init__(self, message, source=None, line=None, offset=None):
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f":{line}"
        if offset is not None:
            where += f"@0x{offset:X}"
        super().__init__(f"{where}: {message}" if where else message)
        self.source = source
        self.line = line
        self.offset = offset


class ConfigError(EvtkError, ValueError):
    """Invalid or unknown configuration values."""


class StreamOrderError(EvtkError, ValueError):
    def __init__(self, index, message="timestamps decrease"):
        super().__init__(f"event {index}: {message}")
        self.index = index


class Event(NamedTuple):
    x: int
    y: int
    t: int
    p: int


class SensorGeometry(NamedTuple):
    width: int = default_width
    height: int = default_height

    def validate(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid sensor geometry {self.width}x{self.height}")
        return self


class LabelSample(NamedTuple):
    x: float
    y: float
    close: int


class Violation(NamedTuple):
    index: int
    reason: str


class EventStream:
    """Time-ordered events of one sensor.

    The record array is made read-only on construction, so streams can be
    shared freely. Use `validate_stream` to check the invariants; the
    constructor does not."""

    __slots__ = ("_events", "geometry")

    def __init__(self, events, geometry=SensorGeometry()):
        events = np.ascontiguousarray(events, dtype=event_dtype)
        events.flags.writeable = False
        self._events = events
        self.geometry = SensorGeometry(*geometry)

    @classmethod
    def empty(cls, geometry=SensorGeometry()):
        return cls(np.zeros(0, dtype=event_dtype), geometry)

    @classmethod
    def from_arrays(cls, t, x, y, p, geometry=SensorGeometry()):
        events = np.zeros(len(t), dtype=event_dtype)
        events["t"], events["x"], events["y"], events["p"] = t, x, y, p
        return cls(events, geometry)

    @classmethod
    def from_events(cls, events, geometry=SensorGeometry()):
        events = list(events)
        return cls.from_arrays(
            [e.t for e in events], [e.x for e in events],
            [e.y for e in events], [e.p for e in events], geometry)

    @property
    def events(self):
        return self._events

    @property
    def t(self):
        return self._events["t"]

    @property
    def x(self):
        return self._events["x"]

    @property
    def y(self):
        return self._events["y"]

    @property
    def p(self):
        return self._events["p"]

    def __len__(self):
        return len(self._events)

    def __getitem__(self, key):
        if isinstance(key, slice) or isinstance(key, np.ndarray):
            return EventStream(self._events[key], self.geometry)
        rec = self._events[key]
        return Event(int(rec["x"]), int(rec["y"]), int(rec["t"]), int(rec["p"]))

    def __iter__(self):
        for rec in self._events:
            yield Event(int(rec["x"]), int(rec["y"]), int(rec["t"]), int(rec["p"]))

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (self.geometry == other.geometry
                and self._events.tobytes() == other._events.tobytes())

    def __repr__(self):
        return f"EventStream({len(self)} events, {self.geometry.width}x{self.geometry.height})"

    def window(self, t_min, t_max):
        """Events with t_min <= t < t_max (stream must be sorted)."""
        lo, hi = np.searchsorted(self.t, [t_min, t_max], side="left")
        return self[lo:hi]


class LabelTrack:
    """Ground-truth pupil centre sampled every `label_period_us`."""

    __slots__ = ("_samples", "t0")

    period = label_period_us

    def __init__(self, samples, t0=0):
        samples = np.ascontiguousarray(samples, dtype=label_dtype)
        samples.flags.writeable = False
        self._samples = samples
        self.t0 = int(t0)

    @classmethod
    def from_arrays(cls, x, y, close, t0=0):
        samples = np.zeros(len(x), dtype=label_dtype)
        samples["x"], samples["y"], samples["close"] = x, y, close
        return cls(samples, t0)

    @property
    def samples(self):
        return self._samples

    @property
    def x(self):
        return self._samples["x"]

    @property
    def y(self):
        return self._samples["y"]

    @property
    def close(self):
        return self._samples["close"]

    @property
    def t_end(self):
        """End of the time span owned by the last sample."""
        return self.t0 + len(self) * self.period

    def times(self):
        return self.t0 + self.period * np.arange(len(self), dtype=np.int64)

    def positions(self):
        return np.stack([self.x, self.y], axis=-1)

    def interpolate(self, t):
        """Pupil centre at times `t`, linear between samples, held at the ends."""
        ts = self.times().astype(np.float64)
        t = np.asarray(t, dtype=np.float64)
        return np.interp(t, ts, self.x), np.interp(t, ts, self.y)

    def __len__(self):
        return len(self._samples)

    def __getitem__(self, key):
        if isinstance(key, slice):
            start = key.indices(len(self))[0]
            if key.step not in (None, 1):
                raise ValueError("label tracks can only be sliced contiguously")
            return LabelTrack(self._samples[key], self.t0 + start * self.period)
        rec = self._samples[key]
        return LabelSample(float(rec["x"]), float(rec["y"]), int(rec["close"]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, LabelTrack):
            return NotImplemented
        return (self.t0 == other.t0
                and self._samples.tobytes() == other._samples.tobytes())

    def __repr__(self):
        return f"LabelTrack({len(self)} samples from t0={self.t0})"


class RecordingBundle(NamedTuple):
    stream: EventStream
    labels: LabelTrack
    id: str

    def with_id(self, suffix):
        return self._replace(id=f"{self.id}{suffix}")


def validate_stream(stream):
    """Return the first invariant violation of `stream`, or None if it is ok."""

    ev = stream.events
    if len(ev) == 0:
        return None

    w, h = stream.geometry
    candidates = list()

    t = ev["t"]
    decreasing = np.flatnonzero(t[1:] < t[:-1])
    if len(decreasing):
        candidates.append((decreasing[0] + 1, 0, "timestamps decrease"))

    for k, (field, limit) in enumerate((("x", w), ("y", h)), start=1):
        bad = np.flatnonzero(ev[field] >= limit)
        if len(bad):
            candidates.append((bad[0], k, f"{field} out of bounds"))

    bad = np.flatnonzero((ev["p"] != 1) & (ev["p"] != -1))
    if len(bad):
        candidates.append((bad[0], 3, "polarity must be ±1"))

    if not candidates:
        return None

    index, _, reason = min(candidates)
    return Violation(int(index), reason)


def validate_bundle(bundle, max_gap_us=coverage_gap_us):
    """Stream invariants plus the pairing of events and labels.

    Every event falls inside the label window, and the events cover that
    window: the first event comes less than `max_gap_us` after its start and
    the last one no earlier than `max_gap_us` before its end.
    """

    violation = validate_stream(bundle.stream)
    if violation is not None:
        return violation

    if len(bundle.labels) == 0:
        return Violation(0, "empty label track")

    t = bundle.stream.t
    outside = np.flatnonzero((t < bundle.labels.t0) | (t >= bundle.labels.t_end))
    if len(outside):
        return Violation(int(outside[0]), "event outside label window")

    if len(t) == 0:
        return Violation(0, "no events cover the label window")
    if t[0] >= bundle.labels.t0 + max_gap_us:
        return Violation(0, f"events start {int(t[0]) - bundle.labels.t0}us after the labels")
    if t[-1] < bundle.labels.t_end - max_gap_us:
        return Violation(len(t) - 1,
                         f"events end {bundle.labels.t_end - int(t[-1])}us before the labels")
    return None


def derive_seed(seed, tag):
    """Per-component seed: first 32 bits of SeedSequence([seed, crc32(tag)])."""
    seq = np.random.SeedSequence([int(seed), zlib.crc32(str(tag).encode())])
    return int(seq.generate_state(1, dtype=np.uint32)[0])
