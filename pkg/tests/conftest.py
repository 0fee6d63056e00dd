import numpy as np
import pytest

from evdata.augment import AugmentConfig
from evdata.base import EventStream, LabelTrack, RecordingBundle, SensorGeometry
from evdata.encode import EncodeConfig
from evdata.synth import TrajectoryConfig, EventGenConfig, generate_dataset
from evtk.config import RunConfig, TrainConfig
from gazenet.models import SpatiotemporalNetConfig, KnightPupilConfig
from gazenet.scaling import ScalingCoefficients

# a sensor small enough for the numpy networks to train in seconds
small_geometry = SensorGeometry(64, 48)
small_trajectory = TrajectoryConfig(duration=0.6, margin=10.0, pursuit_amplitude=8.0,
                                    saccade_speed=400.0)
small_events = EventGenConfig(radius=6.0, ring_rate=3000.0, noise_rate=100.0)

mini_spatiotemporal = SpatiotemporalNetConfig(channels=(4, 8), groups=2)
mini_knightpupil = KnightPupilConfig(
    scaling=ScalingCoefficients(phi=0.0, d0=1, w0=4), stages=2,
    gru_hidden=4, gru_layers=1, gru_dropout=0.0, head_dropout=0.0)


def random_events(rng, n, geometry=SensorGeometry(), t_max=100_000, t_min=0):
    t = np.sort(rng.integers(t_min, t_max, size=n))
    x = rng.integers(0, geometry.width, size=n)
    y = rng.integers(0, geometry.height, size=n)
    p = rng.choice([-1, 1], size=n)
    return EventStream.from_arrays(t, x, y, p, geometry)


def random_bundle(rng, nlabels=20, nevents=500, geometry=SensorGeometry(), t0=0):
    labels = LabelTrack.from_arrays(rng.uniform(0, geometry.width, nlabels),
                                    rng.uniform(0, geometry.height, nlabels),
                                    rng.integers(0, 2, nlabels), t0)
    stream = random_events(rng, nevents, geometry, labels.t_end, t0)
    return RecordingBundle(stream, labels, "rnd")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_bundles():
    return generate_dataset(4, 3, small_trajectory, small_events, small_geometry)


def tiny_config(model="spatiotemporal", epochs=1, **train):
    """A run configuration that trains a mini network in a few seconds"""
    settings = dict(model=model, epochs=epochs, batch_size=8, lr=0.01, schedule="constant",
                    train_length=20, train_stride=10, val_stride=20, prefetch=0)
    settings.update(train)
    return RunConfig(
        trajectory=small_trajectory,
        events=small_events,
        augment=AugmentConfig(max_shift_us=50_000, temporal_shift=False, spatial_flip=True,
                              event_deletion=False),
        encode=EncodeConfig(),
        spatiotemporal=mini_spatiotemporal,
        knightpupil=mini_knightpupil,
        train=TrainConfig(**settings),
    ).validate()


@pytest.fixture
def tiny():
    return tiny_config
