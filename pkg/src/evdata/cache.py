"""Disk cache for preprocessed tensors.

Each entry lives in `<root>/<recording id>/` as a payload file (named tensor
container, see container.py) and a JSON sidecar describing shapes, dtypes, the
configuration that produced it and the payload checksum. The file stem is the
transform fingerprint, so any change of the preprocessing configuration
addresses a different entry.
"""

import hashlib
import json
import logging
import os
import re
from pathlib import Path
from typing import NamedTuple

from .base import FormatError
from .container import encode_tensors, decode_tensors
from .evfile import atomic_write

logger = logging.getLogger(__name__)

# bump to invalidate every existing cache entry
cache_format_version = 1

cache_dir_env = "EVTK_CACHE_DIR"


class CacheKey(NamedTuple):
    recording_id: str
    fingerprint: str


def _plain(value):
    """Convert config records into JSON-compatible structures."""
    if hasattr(value, "_asdict"):
        return {k: _plain(v) for k, v in value._asdict().items()}
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def canonical_config(**parts):
    return json.dumps(dict(format_version=cache_format_version, **_plain(parts)),
                      sort_keys=True, separators=(",", ":"))


def transform_fingerprint(**parts):
    """Stable hash over the complete preprocessing configuration."""
    return hashlib.sha256(canonical_config(**parts).encode()).hexdigest()[:32]


def make_key(recording_id, **parts):
    return CacheKey(recording_id, transform_fingerprint(**parts))


class VoxelCache:

    def __init__(self, root=None):
        if root is None:
            root = os.environ.get(cache_dir_env)
        if root is None:
            raise ValueError(f"no cache root configured (set {cache_dir_env})")
        self.root = Path(root)
        self.hits = 0
        self.misses = 0

    def paths(self, key):
        safe_id = re.sub(r"[^A-Za-z0-9_.+-]", "_", key.recording_id)
        entry = self.root / safe_id
        return entry / f"{key.fingerprint}.npt", entry / f"{key.fingerprint}.json"

    def load(self, key):
        """Return the cached tensors, or None if the entry is missing or corrupt."""

        payload_path, sidecar_path = self.paths(key)
        if not payload_path.exists() or not sidecar_path.exists():
            return None

        try:
            sidecar = json.loads(sidecar_path.read_text())
            payload = payload_path.read_bytes()
            if hashlib.sha256(payload).hexdigest() != sidecar["sha256"]:
                # a writer between its two renames looks the same as a damaged payload
                logger.info(f"cache entry {key.recording_id}/{key.fingerprint} does not "
                            f"match its sidecar, rebuilding")
                return None
            return decode_tensors(payload, source=str(payload_path))

        except (OSError, ValueError, KeyError, TypeError) as ex:
            logger.warning(f"corrupt cache entry {key.recording_id}/{key.fingerprint}"
                           f" ({ex}), rebuilding")
            return None

    def store(self, key, tensors, config=None):
        payload = encode_tensors(tensors)
        payload_path, sidecar_path = self.paths(key)

        sidecar = dict(
            recording_id=key.recording_id,
            fingerprint=key.fingerprint,
            format_version=cache_format_version,
            sha256=hashlib.sha256(payload).hexdigest(),
            tensors={name: dict(shape=list(a.shape), dtype=str(a.dtype))
                     for name, a in tensors.items()},
            config=json.loads(config) if config is not None else None,
        )

        # sidecar first: until the payload lands, readers see a checksum mismatch
        atomic_write(sidecar_path, json.dumps(sidecar, indent=2, sort_keys=True) + "\n",
                     mode="w")
        atomic_write(payload_path, payload)
        return payload

    def get_or_build(self, key, builder, config=None):
        """Return `(tensors, hit)`; on a miss, `builder()` runs and is persisted."""

        tensors = self.load(key)
        if tensors is not None:
            self.hits += 1
            logger.debug(f"cache hit {key.recording_id}/{key.fingerprint}")
            return tensors, True

        self.misses += 1
        logger.info(f"cache miss {key.recording_id}/{key.fingerprint}, building")
        payload = self.store(key, builder(), config)
        return decode_tensors(payload), False


def cache_get_or_build(key, builder, root=None, config=None):
    return VoxelCache(root).get_or_build(key, builder, config)
