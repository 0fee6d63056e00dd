"""Event-stream augmentations that keep labels consistent.

* temporal shift: events move by a whole number of label periods and the label
  track is re-indexed so that every event keeps the label it had;
* spatial flip: x -> W - x and/or y -> H - y for events and labels;
* event deletion: each event is dropped independently with probability p.
"""

import logging
from typing import NamedTuple

import numpy as np

from .base import EvtkError, EventStream, LabelTrack, RecordingBundle, derive_seed

logger = logging.getLogger(__name__)


class AugmentError(EvtkError, ValueError):
    pass


flip_axes_choices = ("horizontal", "vertical", "both", "none")


class AugmentConfig(NamedTuple):
    max_shift_us: int = 200_000
    flip_axes: str = "both"
    p_delete: float = 0.05
    temporal_shift: bool = True
    spatial_flip: bool = True
    event_deletion: bool = True
    seed: int = 0

    def validate(self):
        if self.max_shift_us < 0:
            raise AugmentError(f"max shift must be >= 0, got {self.max_shift_us}")
        if not 0 <= self.p_delete <= 1:
            raise AugmentError(f"deletion probability must be in [0, 1], got {self.p_delete}")
        if self.flip_axes not in flip_axes_choices:
            raise AugmentError(f"flip axes must be one of {flip_axes_choices}")
        return self

    @property
    def flip(self):
        """(horizontal, vertical) flags for the configured axes"""
        return dict(horizontal=(True, False), vertical=(False, True),
                    both=(True, True), none=(False, False))[self.flip_axes]

    def techniques(self):
        """Names of the enabled augmentations, in application order"""
        enabled = list()
        if self.temporal_shift:
            enabled.append("shift")
        if self.spatial_flip and self.flip_axes != "none":
            enabled.append("flip")
        if self.event_deletion:
            enabled.append("delete")
        return enabled


def quantize_shift(delta_t, period):
    """Label-period offset of a shift, rounding toward -infinity."""
    return int(delta_t) // period


def temporal_shift(bundle, delta_t):
    """Shift all events by `delta_t` (quantized to the label period).

    The shift is rounded down to a whole number k of label periods. An event
    that belonged to label i before the shift belongs to label i + k after it,
    so the new track holds the former label j - k at index j. Both are then
    cut to the original recording window; labels with no source sample and
    events outside the surviving labels are dropped.
    """

    labels = bundle.labels
    period = labels.period
    n = len(labels)
    k = quantize_shift(delta_t, period)

    if k == 0:
        return bundle
    if abs(k) >= n:
        raise AugmentError(f"shift of {delta_t}us leaves no overlap with "
                           f"{n} labels")

    # surviving new indices j with 0 <= j - k < n, inside [0, n)
    j_first, j_last = max(0, k), min(n, n + k)
    new_labels = LabelTrack(labels.samples[j_first - k:j_last - k],
                            labels.t0 + j_first * period)

    shifted_t = bundle.stream.t.astype(np.int64) + k * period
    keep = (shifted_t >= new_labels.t0) & (shifted_t < new_labels.t_end)
    events = bundle.stream.events[keep].copy()
    events["t"] = shifted_t[keep]

    return RecordingBundle(EventStream(events, bundle.stream.geometry),
                           new_labels, bundle.id)


def spatial_flip(bundle, horizontal, vertical):
    """Mirror events and labels; flipped event coordinates are clamped to the sensor."""

    if not horizontal and not vertical:
        return bundle

    w, h = bundle.stream.geometry
    events = bundle.stream.events.copy()
    lx, ly = bundle.labels.x, bundle.labels.y

    if horizontal:
        events["x"] = np.minimum(w - events["x"].astype(np.int64), w - 1)
        lx = w - lx
    if vertical:
        events["y"] = np.minimum(h - events["y"].astype(np.int64), h - 1)
        ly = h - ly

    labels = LabelTrack.from_arrays(lx, ly, bundle.labels.close, bundle.labels.t0)
    return RecordingBundle(EventStream(events, bundle.stream.geometry), labels, bundle.id)


def delete_events(bundle, p, seed):
    """Drop each event with probability `p`; one uniform draw per event, in order."""

    if not 0 <= p <= 1:
        raise AugmentError(f"deletion probability must be in [0, 1], got {p}")

    rng = np.random.default_rng(seed)
    keep = rng.random(len(bundle.stream)) >= p
    return bundle._replace(stream=bundle.stream[keep])


def augment_bundle(bundle, technique, cfg, seed):
    """One augmented copy of `bundle` using a single technique."""

    rng = np.random.default_rng(seed)

    if technique == "shift":
        delta_t = int(rng.integers(-cfg.max_shift_us, cfg.max_shift_us + 1))
        out = temporal_shift(bundle, delta_t)
        logger.debug(f"{bundle.id}: shift by {delta_t}us")

    elif technique == "flip":
        out = spatial_flip(bundle, *cfg.flip)

    elif technique == "delete":
        out = delete_events(bundle, cfg.p_delete, int(rng.integers(2**32)))

    else:
        raise AugmentError(f"unknown augmentation '{technique}'")

    return out.with_id(f"+{technique}")


def expand_dataset(bundles, cfg):
    """Originals plus one independently augmented copy per enabled technique."""

    cfg.validate()
    expanded = list(bundles)
    for i, bundle in enumerate(bundles):
        for technique in cfg.techniques():
            seed = derive_seed(cfg.seed, f"augment/{technique}/{i}")
            expanded.append(augment_bundle(bundle, technique, cfg, seed))

    logger.info(f"expanded {len(bundles)} recordings to {len(expanded)} "
                f"({', '.join(cfg.techniques()) or 'no augmentation'})")
    return expanded
