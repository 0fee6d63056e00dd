import numpy as np
import pytest

from evdata.base import (EventStream, LabelTrack, RecordingBundle, SensorGeometry,
                         Violation, derive_seed, validate_stream, validate_bundle)


def test_empty_stream_is_valid():
    assert validate_stream(EventStream.empty()) is None


def test_decreasing_timestamps():
    stream = EventStream.from_arrays([5, 3], [0, 0], [0, 0], [1, 1])
    assert validate_stream(stream) == Violation(1, "timestamps decrease")


def test_x_out_of_bounds():
    stream = EventStream.from_arrays([0], [640], [0], [1], SensorGeometry(640, 480))
    assert validate_stream(stream) == Violation(0, "x out of bounds")


def test_first_violation_wins():
    stream = EventStream.from_arrays([0, 10, 5], [0, 0, 0], [0, 500, 0], [1, 1, 1])
    violation = validate_stream(stream)
    assert violation.index == 1
    assert violation.reason == "y out of bounds"


def test_bad_polarity():
    stream = EventStream.from_arrays([0, 1], [0, 0], [0, 0], [1, 0])
    assert validate_stream(stream) == Violation(1, "polarity must be ±1")


def test_geometry_validate():
    assert SensorGeometry() == (640, 480)
    with pytest.raises(ValueError):
        SensorGeometry(0, 480).validate()


def test_stream_is_read_only():
    stream = EventStream.from_arrays([0], [1], [2], [1])
    with pytest.raises(ValueError):
        stream.events["x"][0] = 5


def test_stream_access():
    stream = EventStream.from_arrays([1, 2, 3], [4, 5, 6], [7, 8, 9], [1, -1, 1])
    e = stream[1]
    assert (e.x, e.y, e.t, e.p) == (5, 8, 2, -1)
    assert len(stream[1:]) == 2
    assert [e.t for e in stream] == [1, 2, 3]
    assert stream == EventStream.from_events(list(stream))


def test_stream_window_is_half_open():
    stream = EventStream.from_arrays([0, 10, 20, 30], [0] * 4, [0] * 4, [1] * 4)
    np.testing.assert_array_equal(stream.window(10, 30).t, [10, 20])


def test_label_track_times_and_slicing():
    track = LabelTrack.from_arrays([1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [0, 1, 0], t0=20_000)
    np.testing.assert_array_equal(track.times(), [20_000, 30_000, 40_000])
    assert track.t_end == 50_000
    tail = track[1:]
    assert tail.t0 == 30_000
    assert tail[0].close == 1
    with pytest.raises(ValueError):
        track[::2]


def test_label_interpolation():
    track = LabelTrack.from_arrays([0.0, 10.0], [0.0, 20.0], [0, 0])
    x, y = track.interpolate([5_000, 20_000])
    np.testing.assert_allclose(x, [5.0, 10.0])
    np.testing.assert_allclose(y, [10.0, 20.0])


def test_bundle_events_outside_label_window():
    labels = LabelTrack.from_arrays([1.0], [1.0], [0])
    stream = EventStream.from_arrays([0, 10_000], [0, 0], [0, 0], [1, 1])
    violation = validate_bundle(RecordingBundle(stream, labels, "r"))
    assert violation == Violation(1, "event outside label window")


def test_bundle_labels_past_the_events():
    labels = LabelTrack.from_arrays(np.zeros(100), np.zeros(100), np.zeros(100))
    stream = EventStream.from_arrays([0, 5_000], [0, 0], [0, 0], [1, 1])
    violation = validate_bundle(RecordingBundle(stream, labels, "r"))
    assert violation == Violation(1, "events end 995000us before the labels")

    late = EventStream.from_arrays([400_000, 999_000], [0, 0], [0, 0], [1, 1])
    violation = validate_bundle(RecordingBundle(late, labels, "r"))
    assert violation == Violation(0, "events start 400000us after the labels")

    empty = EventStream.from_arrays([], [], [], [])
    assert validate_bundle(RecordingBundle(empty, labels, "r")).reason.startswith("no events")


def test_bundle_events_cover_the_labels():
    labels = LabelTrack.from_arrays(np.zeros(100), np.zeros(100), np.zeros(100))
    stream = EventStream.from_arrays([99_999, 500_000, 900_000], [0, 0, 0], [0, 0, 0], [1, -1, 1])
    assert validate_bundle(RecordingBundle(stream, labels, "r")) is None
    assert validate_bundle(RecordingBundle(stream, labels, "r"), max_gap_us=50_000) is not None


def test_derive_seed_is_stable_and_tag_dependent():
    assert derive_seed(7, "events/0") == derive_seed(7, "events/0")
    assert derive_seed(7, "events/0") != derive_seed(7, "events/1")
    assert derive_seed(7, "events/0") != derive_seed(8, "events/0")
    assert 0 <= derive_seed(0, "x") < 2**32
