"""Dense encodings of event streams.

`voxelize` spreads each event linearly over the two nearest of T time bins;
`causal_bin_stream` accumulates signed polarity into fixed-period frames as
events arrive; `encode_recording` and `window_samples` turn a recording into
per-label-step frames and sliding training windows.

Grids are laid out time-major: T x H' x W'.
"""

import logging
from typing import NamedTuple

import numpy as np

from .base import ConfigError, SensorGeometry, StreamOrderError
from .constants import label_period_us

logger = logging.getLogger(__name__)


class EncodeConfig(NamedTuple):
    num_bins: int = 3
    window_us: int = 300_000           # event span of one voxel grid
    downsample: float = 0.125
    normalization: str = "max_abs"     # or "none"
    frame_period_us: int = label_period_us

    def validate(self):
        if self.num_bins < 1:
            raise ConfigError(f"num_bins must be >= 1, got {self.num_bins}")
        if not 0 < self.downsample <= 1:
            raise ConfigError(f"downsample factor must be in (0, 1], got {self.downsample}")
        if self.normalization not in ("max_abs", "none"):
            raise ConfigError(f"unknown normalization '{self.normalization}'")
        if self.frame_period_us <= 0 or self.window_us <= 0:
            raise ConfigError("frame period and window must be positive")
        return self


class VoxelGrid(NamedTuple):
    data: np.ndarray        # T x H' x W'
    window: tuple           # (t_min, t_max) in microseconds
    num_bins: int


def grid_shape(geometry, s):
    """(H', W') = (floor(H*s), floor(W*s)), at least one cell each"""
    geometry = SensorGeometry(*geometry)
    return max(1, int(np.floor(geometry.height * s))), max(1, int(np.floor(geometry.width * s)))


def _cells(x, y, s, shape):
    cy = np.minimum(np.floor(np.asarray(y, dtype=np.float64) * s).astype(np.int64), shape[0] - 1)
    cx = np.minimum(np.floor(np.asarray(x, dtype=np.float64) * s).astype(np.int64), shape[1] - 1)
    return cy, cx


def voxelize(stream, cfg, window, normalized=True):
    """Voxel grid of the events with t_min <= t <= t_max.

    Event i sits at t* = T (t_i - t_min) / (t_max - t_min), clamped to
    [0, T-1], and adds p_i * max(0, 1 - |k - t*|) to bin k.
    """

    t_min, t_max = window
    if t_max <= t_min:
        raise ValueError(f"invalid window [{t_min}, {t_max}]")

    T = cfg.num_bins
    shape = grid_shape(stream.geometry, cfg.downsample)
    data = np.zeros((T,) + shape)

    lo = np.searchsorted(stream.t, t_min, side="left")
    hi = np.searchsorted(stream.t, t_max, side="right")
    ev = stream.events[lo:hi]

    if len(ev):
        tstar = T * (ev["t"].astype(np.float64) - t_min) / (t_max - t_min)
        tstar = np.clip(tstar, 0, T - 1)
        k0 = np.floor(tstar).astype(np.int64)
        frac = tstar - k0
        pol = ev["p"].astype(np.float64)
        cy, cx = _cells(ev["x"], ev["y"], cfg.downsample, shape)

        np.add.at(data, (k0, cy, cx), pol * (1 - frac))
        upper = k0 + 1 < T
        np.add.at(data, (k0[upper] + 1, cy[upper], cx[upper]), pol[upper] * frac[upper])

    grid = VoxelGrid(data, (t_min, t_max), T)
    if normalized and cfg.normalization == "max_abs":
        grid = normalize(grid)
    return grid


def normalize(grid):
    """Scale by the largest magnitude so that every entry lies in [-1, 1]."""

    data = grid.data if isinstance(grid, VoxelGrid) else np.asarray(grid, dtype=np.float64)
    peak = np.max(np.abs(data)) if data.size else 0.0
    if peak > 0:
        data = data / peak
    return grid._replace(data=data) if isinstance(grid, VoxelGrid) else data


def causal_bin_stream(events, period=label_period_us, geometry=SensorGeometry(),
                      s=1.0, t_start=0, t_end=None):
    """Yield frame k = sum of polarities with t in [t_start + k*period, ... + period).

    A frame is emitted as soon as an event at or after its end arrives, or when
    the input ends. With `t_end`, empty trailing frames are emitted until the
    frame containing t_end - 1.
    """

    shape = grid_shape(geometry, s)
    frame = np.zeros(shape)
    k = 0
    last_t = None
    seen = False

    for i, e in enumerate(events):
        if last_t is not None and e.t < last_t:
            raise StreamOrderError(i)
        if e.t < t_start:
            raise StreamOrderError(i, "event before stream start")
        last_t = e.t
        seen = True

        while e.t >= t_start + (k + 1) * period:
            yield frame
            frame = np.zeros(shape)
            k += 1

        cy, cx = _cells(e.x, e.y, s, shape)
        frame[cy, cx] += e.p

    if seen:
        yield frame
        k += 1

    if t_end is not None:
        while t_start + k * period < t_end:
            yield np.zeros(shape)
            k += 1


def bin_offline(stream, period=label_period_us, s=1.0, t_start=0, t_end=None):
    """Whole-stream counterpart of `causal_bin_stream`, as one K x H' x W' array."""

    shape = grid_shape(stream.geometry, s)
    t = stream.t.astype(np.int64)
    if len(t) and t[0] < t_start:
        raise StreamOrderError(0, "event before stream start")

    nframes = int((t[-1] - t_start) // period) + 1 if len(t) else 0
    if t_end is not None:
        nframes = max(nframes, -(-(t_end - t_start) // period))

    frames = np.zeros((nframes,) + shape)
    if len(t):
        k = (t - t_start) // period
        cy, cx = _cells(stream.x, stream.y, s, shape)
        np.add.at(frames, (k, cy, cx), stream.p.astype(np.float64))
    return frames


def encode_recording(bundle, cfg, kind="voxel"):
    """One frame per label step, as an N x C x H' x W' array.

    kind "voxel": step j is the voxel grid (C = num_bins) of the `window_us`
    of events ending where step j ends; with the defaults that is the last
    0.3 s in three bins of 0.1 s.
    kind "binned": step j is the causal polarity frame of step j (C = 1).
    """

    cfg.validate()
    labels = bundle.labels
    n = len(labels)
    shape = grid_shape(bundle.stream.geometry, cfg.downsample)
    period = labels.period
    ends = labels.t0 + period * np.arange(1, n + 1, dtype=np.int64)

    if kind == "voxel":
        frames = np.zeros((n, cfg.num_bins) + shape)
        for j, te in enumerate(ends):
            ts = te - cfg.window_us
            grid = voxelize(bundle.stream.window(max(ts, 0), te), cfg, (ts, te))
            frames[j] = grid.data

    elif kind == "binned":
        binned = bin_offline(bundle.stream.window(labels.t0, labels.t_end), period,
                             cfg.downsample, labels.t0, labels.t_end)
        frames = binned[:n, None]
        if cfg.normalization == "max_abs":
            frames = np.stack([normalize(f) for f in frames]) if n else frames

    else:
        raise ValueError(f"unknown frame kind '{kind}'")

    logger.debug(f"{bundle.id}: encoded {n} {kind} frames of {frames.shape[1:]}")
    return frames


def count_windows(nlabels, length, stride):
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if nlabels < length:
        return 0
    return (nlabels - length) // stride + 1


def window_samples(frames, labels, length, stride):
    """Sliding windows over per-step frames: list of (frames, xy, close) views."""

    samples = list()
    positions = labels.positions()
    for i in range(count_windows(len(labels), length, stride)):
        sl = slice(i * stride, i * stride + length)
        samples.append((frames[sl], positions[sl], labels.close[sl]))
    return samples


def _centre(geometry):
    w, h = SensorGeometry(*geometry)
    return np.array([w / 2, h / 2])


def unit_coordinates(xy, geometry):
    """Pixel positions to [-1, 1] model targets, centred on the sensor"""
    c = _centre(geometry)
    return (np.asarray(xy, dtype=np.float64) - c) / c


def pixel_coordinates(u, geometry):
    c = _centre(geometry)
    return np.asarray(u, dtype=np.float64) * c + c
