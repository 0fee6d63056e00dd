import numpy as np
import pytest

from evdata.augment import (AugmentConfig, AugmentError, quantize_shift, temporal_shift,
                            spatial_flip, delete_events, expand_dataset)
from evdata.base import (EventStream, LabelTrack, RecordingBundle, SensorGeometry,
                         validate_bundle)

from conftest import random_bundle


def label_index(t, labels):
    return (np.asarray(t, dtype=np.int64) - labels.t0) // labels.period


def test_zero_shift_is_identity(rng):
    bundle = random_bundle(rng)
    assert temporal_shift(bundle, 0) is bundle
    assert temporal_shift(bundle, 9_999) is bundle


@pytest.mark.parametrize("delta_t, k", [(50_000, 5), (-15_000, -2), (-10_000, -1), (10_000, 1)])
def test_shift_quantization(delta_t, k):
    assert quantize_shift(delta_t, 10_000) == k


def test_positive_shift_carries_labels_forward(rng):
    bundle = random_bundle(rng, nlabels=20)
    out = temporal_shift(bundle, 50_000)

    assert len(out.labels) == 15
    assert out.labels.t0 == bundle.labels.t0 + 50_000
    # labels move 5 steps later together with the events: the track starts
    # 50 ms later and keeps its first 15 samples in order
    np.testing.assert_array_equal(out.labels.samples, bundle.labels.samples[:15])
    assert validate_bundle(out) is None


def test_negative_shift(rng):
    bundle = random_bundle(rng, nlabels=20)
    out = temporal_shift(bundle, -15_000)
    assert len(out.labels) == 18
    assert out.labels.t0 == 0
    np.testing.assert_array_equal(out.labels.samples, bundle.labels.samples[2:])


def test_shift_keeps_event_label_pairs():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        bundle = random_bundle(rng, nlabels=int(rng.integers(5, 30)), nevents=300)
        n = len(bundle.labels)
        delta_t = int(rng.integers(-(n - 1) * 10_000, n * 10_000))
        out = temporal_shift(bundle, delta_t)
        k = quantize_shift(delta_t, 10_000)

        # brute force: shift every event and look up its label in both tracks
        expected = list()
        for e in bundle.stream:
            t = e.t + k * 10_000
            j = (t - out.labels.t0) // 10_000
            if 0 <= j < len(out.labels):
                expected.append((t, bundle.labels[(e.t - bundle.labels.t0) // 10_000]))
        got = [(e.t, out.labels[int(label_index(e.t, out.labels))]) for e in out.stream]
        assert got == expected
        assert validate_bundle(out) is None


def test_shift_without_overlap(rng):
    bundle = random_bundle(rng, nlabels=10)
    with pytest.raises(AugmentError):
        temporal_shift(bundle, 100_000)
    with pytest.raises(AugmentError):
        temporal_shift(bundle, -100_000)


def test_flip_example():
    geometry = SensorGeometry(640, 480)
    stream = EventStream.from_arrays([0, 1], [100, 0], [10, 479], [1, -1], geometry)
    labels = LabelTrack.from_arrays([100.0], [30.0], [0])
    out = spatial_flip(RecordingBundle(stream, labels, "r"), True, False)

    np.testing.assert_array_equal(out.stream.x, [540, 639])
    np.testing.assert_array_equal(out.stream.y, [10, 479])
    assert out.labels[0] == (540.0, 30.0, 0)


def test_double_flip(rng):
    bundle = random_bundle(rng, nevents=2000)
    twice = spatial_flip(spatial_flip(bundle, True, True), True, True)
    assert twice.labels == bundle.labels

    # the clamp folds column 0 onto W-1, which flips back to column 1
    x, y = bundle.stream.x, bundle.stream.y
    np.testing.assert_array_equal(twice.stream.x, np.where(x == 0, 1, x))
    np.testing.assert_array_equal(twice.stream.y, np.where(y == 0, 1, y))


def test_flip_conserves_events(rng):
    bundle = random_bundle(rng, nevents=1000)
    out = spatial_flip(bundle, False, True)
    assert len(out.stream) == len(bundle.stream)
    np.testing.assert_array_equal(out.stream.t, bundle.stream.t)
    np.testing.assert_array_equal(out.stream.p, bundle.stream.p)
    assert validate_bundle(out) is None


def test_flip_no_axes(rng):
    bundle = random_bundle(rng)
    assert spatial_flip(bundle, False, False) is bundle


def test_delete_extremes(rng):
    bundle = random_bundle(rng)
    assert delete_events(bundle, 0.0, 1).stream == bundle.stream
    out = delete_events(bundle, 1.0, 1)
    assert len(out.stream) == 0
    assert out.labels == bundle.labels


def test_delete_survivors_binomial(rng):
    bundle = random_bundle(rng, nlabels=100, nevents=10_000)
    sigma = np.sqrt(10_000 * 0.05 * 0.95)
    survivors = np.array([len(delete_events(bundle, 0.05, seed).stream) for seed in range(100)])
    assert np.count_nonzero(np.abs(survivors - 9500) <= 3 * sigma) >= 95
    assert abs(survivors.mean() - 9500) <= 3 * sigma / 10


def test_delete_bad_probability(rng):
    with pytest.raises(AugmentError):
        delete_events(random_bundle(rng), 1.5, 0)


def test_expand_counts(rng):
    bundle = random_bundle(rng, nlabels=40)
    cfg = AugmentConfig(max_shift_us=50_000)
    out = expand_dataset([bundle], cfg)
    assert [b.id for b in out] == ["rnd", "rnd+shift", "rnd+flip", "rnd+delete"]
    assert all(validate_bundle(b) is None for b in out)


def test_expand_nothing_enabled(rng):
    bundle = random_bundle(rng)
    cfg = AugmentConfig(temporal_shift=False, spatial_flip=False, event_deletion=False)
    assert expand_dataset([bundle], cfg) == [bundle]
    assert AugmentConfig(flip_axes="none").techniques() == ["shift", "delete"]


def test_expand_is_deterministic(rng):
    bundles = [random_bundle(rng, nlabels=40), random_bundle(rng, nlabels=40)]
    cfg = AugmentConfig(max_shift_us=100_000, seed=9)
    a, b = expand_dataset(bundles, cfg), expand_dataset(bundles, cfg)
    for x, y in zip(a, b):
        assert x.id == y.id
        assert x.stream == y.stream
        assert x.labels == y.labels


def test_config_validation():
    with pytest.raises(AugmentError):
        AugmentConfig(p_delete=-0.1).validate()
    with pytest.raises(AugmentError):
        AugmentConfig(flip_axes="diagonal").validate()
