"""Event and label files.

Two event formats are supported:

* text, one event per line: `t_us,x,y,p` with p in {-1, 1};
* packed binary: the `EventFileHeader` (8-byte magic `EVTK0001`, u16 width,
  u16 height) followed by little-endian 13-byte records (u64 t, u16 x,
  u16 y, i8 p).

Labels are text, one sample per line: `idx,x,y,close`, idx consecutive from 0.
A label file may start with a `# t0_us=<time>` comment giving the time of
sample 0; without it, t0 is 0.
"""

import logging
import os
import tempfile
from pathlib import Path

import numpy as np

from .base import (EventStream, LabelTrack, RecordingBundle, SensorGeometry,
                   FormatError, event_dtype, validate_stream)
from .header import EventFileHeader

logger = logging.getLogger(__name__)


def atomic_write(path, data, mode="wb"):
    """Write via a temporary file in the target directory and rename it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_stream(stream, source, offset_of=None, line_of=None):
    violation = validate_stream(stream)
    if violation is None:
        return stream
    i = violation.index
    raise FormatError(violation.reason, source=source,
                      line=None if line_of is None else line_of(i),
                      offset=None if offset_of is None else offset_of(i))


class TextEventReader:
    """Reader for `t_us,x,y,p` text files.

    Text files do not record the sensor geometry, so it is passed in."""

    def __init__(self, filename, geometry=SensorGeometry()):
        self.filename = str(filename)
        self.geometry = SensorGeometry(*geometry)

    def read(self):
        t, x, y, p = list(), list(), list(), list()
        lines = list()

        with open(self.filename, "r") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue

                cols = line.split(",")
                if len(cols) != 4:
                    raise FormatError(f"expected 4 fields, found {len(cols)}",
                                      source=self.filename, line=lineno)
                try:
                    ti, xi, yi, pi = (int(c) for c in cols)
                except ValueError:
                    raise FormatError(f"malformed event line '{line}'",
                                      source=self.filename, line=lineno) from None

                if pi not in (-1, 1):
                    raise FormatError("polarity must be ±1",
                                      source=self.filename, line=lineno)
                if ti < 0:
                    raise FormatError("negative timestamp",
                                      source=self.filename, line=lineno)
                if not 0 <= xi < self.geometry.width:
                    raise FormatError("x out of bounds", source=self.filename, line=lineno)
                if not 0 <= yi < self.geometry.height:
                    raise FormatError("y out of bounds", source=self.filename, line=lineno)

                t.append(ti)
                x.append(xi)
                y.append(yi)
                p.append(pi)
                lines.append(lineno)

        stream = EventStream.from_arrays(t, x, y, p, self.geometry)
        logger.debug(f"read {len(stream)} events from {self.filename}")
        return _check_stream(stream, self.filename, line_of=lambda i: lines[i])


class BinaryEventReader:
    """Reader for packed binary event files."""

    def __init__(self, filename):
        self.filename = str(filename)

    def read(self):
        with open(self.filename, "rb") as f:
            hdr = EventFileHeader.read(f, source=self.filename)
            payload = f.read()

        base = EventFileHeader.header_size
        remainder = len(payload) % event_dtype.itemsize
        if remainder:
            nfull = len(payload) // event_dtype.itemsize
            raise FormatError(f"truncated record ({remainder} of "
                              f"{event_dtype.itemsize} bytes)", source=self.filename,
                              offset=base + nfull * event_dtype.itemsize)

        events = np.frombuffer(payload, dtype=event_dtype)
        geometry = SensorGeometry(hdr.width, hdr.height)
        stream = EventStream(events.copy(), geometry)
        logger.debug(f"read {len(stream)} events from {self.filename}")
        return _check_stream(stream, self.filename,
                             offset_of=lambda i: base + i * event_dtype.itemsize)

    def header(self):
        with open(self.filename, "rb") as f:
            return EventFileHeader.read(f, source=self.filename)


class LabelReader:
    """Reader for `idx,x,y,close` label files."""

    def __init__(self, filename):
        self.filename = str(filename)

    def read(self):
        x, y, close = list(), list(), list()
        t0 = 0

        with open(self.filename, "r") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    if key.strip() == "t0_us":
                        t0 = int(value)
                    continue

                cols = line.split(",")
                if len(cols) != 4:
                    raise FormatError(f"expected 4 fields, found {len(cols)}",
                                      source=self.filename, line=lineno)
                try:
                    idx = int(cols[0])
                    xi, yi = float(cols[1]), float(cols[2])
                    ci = int(cols[3])
                except ValueError:
                    raise FormatError(f"malformed label line '{line}'",
                                      source=self.filename, line=lineno) from None

                if idx != len(x):
                    raise FormatError(f"label index {idx} is not consecutive "
                                      f"(expected {len(x)})",
                                      source=self.filename, line=lineno)
                if ci not in (0, 1):
                    raise FormatError("close must be 0 or 1",
                                      source=self.filename, line=lineno)

                x.append(xi)
                y.append(yi)
                close.append(ci)

        return LabelTrack.from_arrays(x, y, close, t0)


def format_events_text(stream):
    ev = stream.events
    return "".join(f"{t},{x},{y},{p}\n"
                   for t, x, y, p in zip(ev["t"].tolist(), ev["x"].tolist(),
                                         ev["y"].tolist(), ev["p"].tolist()))


def format_events_binary(stream):
    hdr = EventFileHeader.for_geometry(stream.geometry)
    return hdr.tobytes() + stream.events.tobytes()


def format_labels(track):
    lines = list()
    if track.t0 != 0:
        lines.append(f"# t0_us={track.t0}\n")
    for i, (x, y, c) in enumerate(zip(track.x.tolist(), track.y.tolist(),
                                      track.close.tolist())):
        lines.append(f"{i},{x!r},{y!r},{c}\n")
    return "".join(lines)


def write_events(stream, path):
    """Write `stream` in the format selected by the file extension."""
    path = Path(path)
    if path.suffix == ".evt":
        atomic_write(path, format_events_binary(stream))
    elif path.suffix in (".csv", ".txt"):
        atomic_write(path, format_events_text(stream), mode="w")
    else:
        raise ValueError(f"unknown event file type: {path}")
    logger.debug(f"wrote {len(stream)} events to {path}")


def write_labels(track, path):
    atomic_write(path, format_labels(track), mode="w")


def read_labels(path):
    return LabelReader(path).read()


def read_events(path, geometry=SensorGeometry()):
    from .factory import make_reader
    return make_reader(path, geometry).read()


def bundle_paths(directory, rec_id):
    directory = Path(directory)
    return directory / f"{rec_id}.evt", directory / f"{rec_id}.labels"


def write_bundle(bundle, directory):
    evpath, lblpath = bundle_paths(directory, bundle.id)
    write_events(bundle.stream, evpath)
    write_labels(bundle.labels, lblpath)


def read_bundle(directory, rec_id):
    evpath, lblpath = bundle_paths(directory, rec_id)
    return RecordingBundle(BinaryEventReader(evpath).read(),
                           LabelReader(lblpath).read(), rec_id)
