import logging

import numpy as np
import pytest

from evdata.cache import VoxelCache, make_key, canonical_config, cache_get_or_build
from evdata.encode import EncodeConfig, encode_recording


@pytest.fixture
def cache(tmp_path):
    return VoxelCache(tmp_path / "cache")


def builder_for(bundle, cfg, calls):
    def build():
        calls.append(cfg)
        return dict(frames=encode_recording(bundle, cfg, "voxel"),
                    close=bundle.labels.close.astype(np.uint8))
    return build


def test_miss_then_hit(cache, small_bundles):
    bundle, cfg, calls = small_bundles[0], EncodeConfig(), list()
    key = make_key(bundle.id, encode=cfg)

    first, hit = cache.get_or_build(key, builder_for(bundle, cfg, calls), canonical_config(encode=cfg))
    assert not hit
    second, hit = cache.get_or_build(key, builder_for(bundle, cfg, calls))
    assert hit
    assert len(calls) == 1
    assert (cache.hits, cache.misses) == (1, 1)
    for name in first:
        assert first[name].tobytes() == second[name].tobytes()
        assert first[name].dtype == second[name].dtype


def test_config_change_is_a_miss(cache, small_bundles):
    bundle, calls = small_bundles[0], list()
    for bins in (3, 4):
        cfg = EncodeConfig(num_bins=bins)
        _, hit = cache.get_or_build(make_key(bundle.id, encode=cfg), builder_for(bundle, cfg, calls))
        assert not hit
    assert len(calls) == 2


@pytest.mark.parametrize("field, value", [
    ("num_bins", 4), ("window_us", 200_000), ("downsample", 0.25),
    ("normalization", "none"), ("frame_period_us", 5_000),
])
def test_fingerprint_single_field(field, value):
    base = EncodeConfig()
    changed = base._replace(**{field: value})
    assert make_key("r", encode=base) != make_key("r", encode=changed)
    assert make_key("r", encode=base) == make_key("r", encode=EncodeConfig())


def test_fingerprint_covers_other_parts():
    cfg = EncodeConfig()
    assert make_key("r", encode=cfg, kind="voxel") != make_key("r", encode=cfg, kind="binned")
    assert make_key("a", encode=cfg) != make_key("b", encode=cfg)


def test_truncated_payload_self_heals(cache, small_bundles, caplog):
    bundle, cfg, calls = small_bundles[1], EncodeConfig(), list()
    key = make_key(bundle.id, encode=cfg)
    cache.get_or_build(key, builder_for(bundle, cfg, calls))

    payload, _ = cache.paths(key)
    payload.write_bytes(payload.read_bytes()[:-7])

    with caplog.at_level(logging.INFO, logger="evdata.cache"):
        tensors, hit = cache.get_or_build(key, builder_for(bundle, cfg, calls))
    assert not hit
    assert "does not match its sidecar" in caplog.text
    fresh = builder_for(bundle, cfg, list())()
    np.testing.assert_array_equal(tensors["frames"], fresh["frames"])

    _, hit = cache.get_or_build(key, builder_for(bundle, cfg, calls))
    assert hit


def test_missing_sidecar_rebuilds(cache, small_bundles):
    bundle, cfg, calls = small_bundles[1], EncodeConfig(), list()
    key = make_key(bundle.id, encode=cfg)
    cache.get_or_build(key, builder_for(bundle, cfg, calls))
    cache.paths(key)[1].unlink()
    _, hit = cache.get_or_build(key, builder_for(bundle, cfg, calls))
    assert not hit


def test_unreadable_sidecar_is_reported(cache, small_bundles, caplog):
    bundle, cfg, calls = small_bundles[1], EncodeConfig(), list()
    key = make_key(bundle.id, encode=cfg)
    cache.get_or_build(key, builder_for(bundle, cfg, calls))
    cache.paths(key)[1].write_text("{not json")

    with caplog.at_level(logging.WARNING, logger="evdata.cache"):
        _, hit = cache.get_or_build(key, builder_for(bundle, cfg, calls))
    assert not hit
    assert "corrupt cache entry" in caplog.text


def test_interrupted_write_is_a_quiet_miss(cache, small_bundles, caplog, monkeypatch):
    import evdata.cache
    bundle, cfg = small_bundles[2], EncodeConfig()
    key = make_key(bundle.id, encode=cfg)
    cache.store(key, dict(frames=np.zeros((2, 3))))

    written = list()
    write = evdata.cache.atomic_write

    def sidecar_only(path, data, mode="wb"):
        written.append(path)
        if path.suffix != ".json":
            raise OSError("interrupted")
        write(path, data, mode)

    # a second writer stops after its first rename, leaving the old payload behind
    monkeypatch.setattr(evdata.cache, "atomic_write", sidecar_only)
    with pytest.raises(OSError):
        cache.store(key, dict(frames=np.ones((2, 3))))
    assert [p.suffix for p in written] == [".json", ".npt"]
    monkeypatch.undo()

    with caplog.at_level(logging.WARNING, logger="evdata.cache"):
        assert cache.load(key) is None
    assert caplog.text == ""

    cache.paths(key)[0].unlink()
    assert cache.load(key) is None
    assert caplog.text == ""

    tensors, hit = cache.get_or_build(key, builder_for(bundle, cfg, list()))
    assert not hit
    assert cache.load(key)["frames"].tobytes() == tensors["frames"].tobytes()


def test_sidecar_describes_payload(cache, small_bundles):
    import json
    bundle, cfg = small_bundles[0], EncodeConfig()
    key = make_key(bundle.id, encode=cfg)
    cache.get_or_build(key, builder_for(bundle, cfg, list()), canonical_config(encode=cfg))
    sidecar = json.loads(cache.paths(key)[1].read_text())
    assert sidecar["recording_id"] == bundle.id
    assert sidecar["config"]["encode"]["num_bins"] == 3
    assert sidecar["tensors"]["close"]["dtype"] == "uint8"


def test_root_from_environment(tmp_path, monkeypatch, small_bundles):
    monkeypatch.setenv("EVTK_CACHE_DIR", str(tmp_path / "env"))
    key = make_key("r", encode=EncodeConfig())
    tensors, hit = cache_get_or_build(key, lambda: dict(a=np.arange(3.0)))
    assert not hit
    assert (tmp_path / "env" / "r").is_dir()


def test_no_root(monkeypatch):
    monkeypatch.delenv("EVTK_CACHE_DIR", raising=False)
    with pytest.raises(ValueError):
        VoxelCache()
