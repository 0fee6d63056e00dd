"""Synthetic pupil trajectories and the events an eye camera would see.

The pupil is a dark disc; an event camera fires where intensity changes, so
the simulated events lie on a ring of `radius` pixels around the pupil centre.
The model is deliberately crude: data only has to be consistent with its
labels, not photometric.

All randomness comes from `numpy.random.default_rng` (PCG64) seeded from the
config, so a given seed yields the same data on every run.
"""

import logging
import math
from typing import NamedTuple

import numpy as np

from .base import (EvtkError, EventStream, LabelTrack, RecordingBundle,
                   SensorGeometry, derive_seed)
from .constants import label_period_us

logger = logging.getLogger(__name__)


class SynthError(EvtkError, ValueError):
    pass


class TrajectoryConfig(NamedTuple):
    duration: float = 4.0              # seconds
    p_fixation: float = 0.4
    p_saccade: float = 0.25
    p_pursuit: float = 0.25
    p_blink: float = 0.1
    saccade_speed: float = 2000.0      # peak speed, pixels/second
    pursuit_amplitude: float = 60.0    # pixels
    pursuit_frequency: float = 0.5     # Hz
    fixation_time: tuple = (0.2, 0.6)  # seconds, uniform range
    pursuit_time: tuple = (0.5, 1.5)
    blink_time: tuple = (0.1, 0.3)
    jitter: float = 0.5                # label noise sigma, pixels
    margin: float = 40.0               # keep the centre this far from the border
    seed: int = 0

    @property
    def segment_mix(self):
        return (self.p_fixation, self.p_saccade, self.p_pursuit, self.p_blink)

    def validate(self):
        mix = self.segment_mix
        if any(p < 0 for p in mix) or abs(sum(mix) - 1.0) > 1e-9:
            raise SynthError(f"segment probabilities must be >= 0 and sum to 1: {mix}")
        if self.duration <= 0:
            raise SynthError(f"duration must be positive, got {self.duration}")
        if self.saccade_speed <= 0:
            raise SynthError("saccade speed must be positive")
        if self.jitter < 0 or self.margin < 0:
            raise SynthError("jitter and margin must be non-negative")
        return self


class EventGenConfig(NamedTuple):
    radius: float = 25.0               # pupil ring radius, pixels
    ring_rate: float = 10_000.0        # events/second on the ring
    noise_rate: float = 500.0          # background events/second, whole sensor
    blink_suppression: float = 0.05    # ring rate factor while the eye is closed
    edge_jitter: float = 0.5           # radial sigma, clipped at 3 sigma
    seed: int = 0

    def validate(self):
        if self.radius <= 0:
            raise SynthError(f"ring radius must be positive, got {self.radius}")
        if self.ring_rate < 0 or self.noise_rate < 0:
            raise SynthError("event rates must be non-negative")
        if not 0 <= self.blink_suppression <= 1:
            raise SynthError("blink suppression must be within [0, 1]")
        if self.edge_jitter < 0:
            raise SynthError("edge jitter must be non-negative")
        return self


FIXATION, SACCADE, PURSUIT, BLINK = range(4)

rate_hz = 1e6 / label_period_us


def _min_jerk(n):
    tau = np.arange(1, n + 1) / n
    return 10 * tau**3 - 15 * tau**4 + 6 * tau**5


def generate_trajectory(cfg, geometry=SensorGeometry()):
    """Sample a 100 Hz label track of `cfg.duration` seconds."""

    cfg.validate()
    geometry = SensorGeometry(*geometry).validate()

    nsamples = math.ceil(round(cfg.duration * rate_hz, 9))
    if cfg.duration * rate_hz < 1:
        raise SynthError(f"duration {cfg.duration}s is too short for one label sample")

    lo = np.array([cfg.margin, cfg.margin])
    hi = np.array([geometry.width - cfg.margin, geometry.height - cfg.margin])
    if np.any(hi < lo):
        raise SynthError(f"margin {cfg.margin} does not fit a "
                         f"{geometry.width}x{geometry.height} sensor")

    rng = np.random.default_rng(cfg.seed)
    pos = np.array([geometry.width / 2, geometry.height / 2])
    xy = np.zeros((nsamples, 2))
    close = np.zeros(nsamples, dtype=np.uint8)

    i = 0
    while i < nsamples:
        kind = rng.choice(4, p=cfg.segment_mix)

        if kind == FIXATION:
            n = max(1, round(rng.uniform(*cfg.fixation_time) * rate_hz))
            seg = np.repeat(pos[None, :], n, axis=0)

        elif kind == SACCADE:
            target = rng.uniform(lo, hi)
            dist = np.linalg.norm(target - pos)
            # a minimum-jerk profile peaks at 1.875 times its mean speed
            n = max(1, math.ceil(1.875 * dist / cfg.saccade_speed * rate_hz))
            seg = pos + _min_jerk(n)[:, None] * (target - pos)

        elif kind == PURSUIT:
            n = max(1, round(rng.uniform(*cfg.pursuit_time) * rate_hz))
            angle = rng.uniform(0, 2 * np.pi)
            direction = np.array([np.cos(angle), np.sin(angle)])
            t = np.arange(1, n + 1) / rate_hz
            swing = cfg.pursuit_amplitude * np.sin(2 * np.pi * cfg.pursuit_frequency * t)
            seg = np.clip(pos + swing[:, None] * direction, lo, hi)

        else:
            n = max(1, round(rng.uniform(*cfg.blink_time) * rate_hz))
            seg = np.repeat(pos[None, :], n, axis=0)
            close[i:i + n] = 1

        n = min(n, nsamples - i)
        xy[i:i + n] = seg[:n]
        pos = seg[n - 1].copy()
        i += n

    if cfg.jitter > 0:
        xy += rng.normal(0.0, cfg.jitter, size=xy.shape)
    xy = np.clip(xy, lo, hi)

    return LabelTrack.from_arrays(xy[:, 0], xy[:, 1], close)


def generate_events(track, cfg, geometry=SensorGeometry()):
    """Sample ring and background events for `track`, sorted by time."""

    cfg.validate()
    geometry = SensorGeometry(*geometry).validate()
    if len(track) == 0:
        raise SynthError("cannot generate events for an empty label track")

    rng = np.random.default_rng(cfg.seed)
    period = track.period
    nlabels = len(track)

    # ring events: Poisson count per label interval, uniform time within it
    rates = np.where(track.close == 1, cfg.ring_rate * cfg.blink_suppression, cfg.ring_rate)
    counts = rng.poisson(rates * period * 1e-6)
    interval = np.repeat(np.arange(nlabels), counts)
    nring = len(interval)

    t_ring = track.t0 + interval * period + rng.integers(0, period, size=nring)
    cx, cy = track.interpolate(t_ring)
    theta = rng.uniform(0, 2 * np.pi, size=nring)
    radial = cfg.radius + np.clip(rng.normal(0.0, 1.0, size=nring) * cfg.edge_jitter,
                                  -3 * cfg.edge_jitter, 3 * cfg.edge_jitter)
    x_ring = np.clip(np.rint(cx + radial * np.cos(theta)), 0, geometry.width - 1)
    y_ring = np.clip(np.rint(cy + radial * np.sin(theta)), 0, geometry.height - 1)

    # the leading edge of a dark pupil darkens (OFF), the trailing edge brightens
    pos = track.positions()
    velocity = np.diff(pos, axis=0, append=pos[-1:]) if nlabels > 1 else np.zeros_like(pos)
    if nlabels > 1:
        velocity[-1] = velocity[-2]
    v = velocity[interval]
    facing = np.cos(theta) * v[:, 0] + np.sin(theta) * v[:, 1]
    random_pol = rng.choice(np.array([-1, 1], dtype=np.int8), size=nring)
    p_ring = np.where(np.abs(facing) > 1e-9, np.where(facing > 0, -1, 1), random_pol)

    # background noise, uniform over the sensor and the label window
    duration_s = nlabels * period * 1e-6
    nnoise = rng.poisson(cfg.noise_rate * duration_s)
    t_noise = rng.integers(track.t0, track.t_end, size=nnoise)
    x_noise = rng.integers(0, geometry.width, size=nnoise)
    y_noise = rng.integers(0, geometry.height, size=nnoise)
    p_noise = rng.choice(np.array([-1, 1], dtype=np.int8), size=nnoise)

    t = np.concatenate([t_ring, t_noise])
    order = np.argsort(t, kind="stable")
    stream = EventStream.from_arrays(
        t[order],
        np.concatenate([x_ring, x_noise])[order],
        np.concatenate([y_ring, y_noise])[order],
        np.concatenate([p_ring, p_noise])[order],
        geometry)

    logger.debug(f"generated {nring} ring and {nnoise} noise events "
                 f"over {nlabels} labels")
    return stream


def generate_recording(rec_id, traj_cfg, event_cfg, geometry=SensorGeometry()):
    if traj_cfg.margin < event_cfg.radius:
        raise SynthError(f"trajectory margin {traj_cfg.margin} is smaller than "
                         f"the ring radius {event_cfg.radius}")
    track = generate_trajectory(traj_cfg, geometry)
    stream = generate_events(track, event_cfg, geometry)
    return RecordingBundle(stream, track, rec_id)


def generate_dataset(n, seed, traj_cfg=TrajectoryConfig(), event_cfg=EventGenConfig(),
                     geometry=SensorGeometry()):
    """`n` recordings `rec000`, `rec001`, ... with seeds derived from `seed`."""

    bundles = list()
    for i in range(n):
        bundle = generate_recording(
            f"rec{i:03d}",
            traj_cfg._replace(seed=derive_seed(seed, f"trajectory/{i}")),
            event_cfg._replace(seed=derive_seed(seed, f"events/{i}")),
            geometry)
        logger.info(f"{bundle.id}: {len(bundle.stream)} events, {len(bundle.labels)} labels")
        bundles.append(bundle)
    return bundles
