"""Recording datasets on disk, encoding through the cache, windows and batches.

A dataset directory holds `<id>.evt` + `<id>.labels` per recording and a
`dataset.json` index listing the ids in order together with the sensor
geometry.
"""

import hashlib
import json
import logging
import queue
import threading
from pathlib import Path
from typing import NamedTuple

import numpy as np

from evdata.base import ConfigError, SensorGeometry, validate_bundle, FormatError
from evdata.cache import make_key, canonical_config
from evdata.encode import encode_recording, count_windows, unit_coordinates
from evdata.evfile import atomic_write, bundle_paths, read_bundle, write_bundle

logger = logging.getLogger(__name__)

index_name = "dataset.json"
dataset_format = 1


def write_dataset(bundles, directory):
    directory = Path(directory)
    for bundle in bundles:
        write_bundle(bundle, directory)
    geometry = bundles[0].stream.geometry if bundles else SensorGeometry()
    index = dict(format=dataset_format, geometry=list(geometry),
                 recordings=[b.id for b in bundles])
    atomic_write(directory / index_name, json.dumps(index, indent=2) + "\n", mode="w")
    logger.info(f"wrote {len(bundles)} recordings to {directory}")


def read_index(directory):
    path = Path(directory) / index_name
    try:
        index = json.loads(path.read_text())
    except json.JSONDecodeError as ex:
        raise FormatError(f"invalid dataset index: {ex}", source=str(path)) from None
    if index.get("format") != dataset_format:
        raise FormatError(f"unsupported dataset format {index.get('format')}", source=str(path))
    return index


def content_digest(directory, rec_id):
    """Short hash of a recording's files; part of its cache identity"""
    h = hashlib.sha1()
    for path in bundle_paths(directory, rec_id):
        h.update(path.read_bytes())
    return h.hexdigest()[:12]


def load_dataset(directory):
    """Read all recordings listed in the index; returns (bundles, digests)."""

    index = read_index(directory)
    bundles, digests = list(), dict()
    for rec_id in index["recordings"]:
        bundle = read_bundle(directory, rec_id)
        violation = validate_bundle(bundle)
        if violation is not None:
            raise FormatError(f"recording {rec_id}: event {violation.index}: {violation.reason}",
                              source=str(directory))
        bundles.append(bundle)
        digests[rec_id] = content_digest(directory, rec_id)
    logger.info(f"loaded {len(bundles)} recordings from {directory}")
    return bundles, digests


def split_recordings(bundles, val_fraction=0.25):
    """Deterministic split by recording id: the last ids form the validation set."""

    if len(bundles) < 2:
        raise ConfigError(f"need at least 2 recordings for a train/validation split, "
                          f"got {len(bundles)}")
    ordered = sorted(bundles, key=lambda b: b.id)
    nval = min(len(ordered) - 1, max(1, round(len(ordered) * val_fraction)))
    return ordered[:-nval], ordered[-nval:]


class EncodedRecording(NamedTuple):
    id: str
    frames: np.ndarray      # N x C x H' x W'
    targets: np.ndarray     # N x 2, in unit coordinates
    close: np.ndarray       # N


def _cache_identity(bundle, digests):
    base = bundle.id.split("+", 1)[0]
    digest = digests.get(base)
    return bundle.id if digest is None else f"{bundle.id}@{digest}"


def encode_dataset(bundles, encode_cfg, kind, cache=None, digests=None, **fingerprint):
    """Per-step frames of every bundle, through `cache` when one is given.

    `fingerprint` holds everything else that shaped the bundles or their
    windows (augmentation settings, window length and strides); it is part of
    the cache key.
    """

    digests = digests or dict()
    encoded = list()
    for bundle in bundles:
        geometry = bundle.stream.geometry

        def build(bundle=bundle, geometry=geometry):
            frames = encode_recording(bundle, encode_cfg, kind)
            return dict(frames=frames,
                        targets=unit_coordinates(bundle.labels.positions(), geometry),
                        close=bundle.labels.close.astype(np.uint8))

        if cache is None:
            tensors = build()
        else:
            parts = dict(encode=encode_cfg, kind=kind, **fingerprint)
            key = make_key(_cache_identity(bundle, digests), **parts)
            tensors, _ = cache.get_or_build(key, build, canonical_config(**parts))

        encoded.append(EncodedRecording(bundle.id, tensors["frames"],
                                        tensors["targets"], tensors["close"]))
    return encoded


class WindowSet:
    """Sliding windows over encoded recordings, addressed as (recording, start)."""

    def __init__(self, recordings, length, stride):
        self.recordings = list(recordings)
        self.length = length
        self.stride = stride
        self.index = [(r, i * stride)
                      for r, rec in enumerate(self.recordings)
                      for i in range(count_windows(len(rec.frames), length, stride))]

    def __len__(self):
        return len(self.index)

    def window(self, i):
        r, start = self.index[i]
        rec = self.recordings[r]
        sl = slice(start, start + self.length)
        return rec.frames[sl], rec.targets[sl], rec.close[sl]

    def batches(self, batch_size, rng=None):
        """Yield (x, y, close) batches; shuffled when `rng` is given, last batch may be short."""
        order = np.arange(len(self)) if rng is None else rng.permutation(len(self))
        for lo in range(0, len(order), batch_size):
            items = [self.window(i) for i in order[lo:lo + batch_size]]
            yield (np.stack([w[0] for w in items]),
                   np.stack([w[1] for w in items]),
                   np.stack([w[2] for w in items]))

    def batch_count(self, batch_size):
        return -(-len(self) // batch_size)

    def targets(self):
        return np.stack([self.window(i)[1] for i in range(len(self))]) if len(self) else np.zeros((0, self.length, 2))


_done = object()


def prefetch(iterator, depth=2):
    """Run `iterator` in a worker thread, keeping up to `depth` items queued."""

    if depth < 1:
        yield from iterator
        return

    items = queue.Queue(maxsize=depth)
    stop = threading.Event()

    def produce():
        try:
            for item in iterator:
                while not stop.is_set():
                    try:
                        items.put(item, timeout=0.1)
                        break
                    except queue.Full:
                        continue
                if stop.is_set():
                    return
            items.put(_done)
        except BaseException as ex:
            items.put(ex)

    worker = threading.Thread(target=produce, name="evtk-prefetch", daemon=True)
    worker.start()
    try:
        while True:
            item = items.get()
            if item is _done:
                break
            if isinstance(item, BaseException):
                raise item
            yield item
    finally:
        stop.set()
        worker.join(timeout=1.0)
