import numpy as np
import pytest

from evdata.base import ConfigError
from evdata.encode import pixel_coordinates
from evdata.synth import generate_dataset
from evtk.metrics import TrainingError, constant_baseline
from evtk.train import Trainer, prepare_windows, train, load_trained, log_columns
from gazenet.checkpoint import load_checkpoint

from conftest import small_events, small_geometry, small_trajectory, tiny_config


def test_one_epoch(tmp_path, small_bundles, tiny):
    result = train(tiny(), small_bundles, tmp_path)
    assert len(result.history) == 1
    assert set(result.checkpoints) == {"best_dist", "best_val_loss", "final"}
    assert (tmp_path / "checkpoints" / "last.ckpt").exists()

    lines = result.log_path.read_text().splitlines()
    assert lines[0] == ",".join(log_columns)
    assert len(lines) == 2
    assert lines[1].startswith("1,")
    assert result.best_dist == result.history[0].val_dist


def test_knightpupil_epoch(tmp_path, small_bundles, tiny):
    result = train(tiny("knightpupil", schedule="cosine", optimizer="adamw"),
                   small_bundles, tmp_path)
    assert np.isfinite(result.history[0].train_loss)
    meta = load_checkpoint(result.checkpoints["final"]).meta
    assert meta["model"] == "knightpupil"
    assert meta["epoch"] == 1


def test_same_seed_same_run(tmp_path, small_bundles, tiny):
    a = train(tiny(epochs=2), small_bundles, tmp_path / "a")
    b = train(tiny(epochs=2), small_bundles, tmp_path / "b")
    assert a.log_path.read_text() == b.log_path.read_text()
    assert a.checkpoints["final"].read_bytes() == b.checkpoints["final"].read_bytes()


def test_resume_continues_exactly(tmp_path, small_bundles, tiny):
    config = tiny(epochs=3)
    whole = train(config, small_bundles, tmp_path / "whole")

    part = train(config, small_bundles, tmp_path / "part", stop_after=1)
    assert len(part.history) == 1
    assert "final" not in part.checkpoints
    resumed = train(config, small_bundles, tmp_path / "part",
                    resume=tmp_path / "part" / "checkpoints" / "last.ckpt")

    assert resumed.history == whole.history
    assert resumed.log_path.read_text() == whole.log_path.read_text()
    assert resumed.checkpoints["final"].read_bytes() == whole.checkpoints["final"].read_bytes()


def test_resume_wrong_model(tmp_path, small_bundles, tiny):
    train(tiny(), small_bundles, tmp_path / "st")
    with pytest.raises(ConfigError, match="holds a spatiotemporal model"):
        train(tiny("knightpupil"), small_bundles, tmp_path / "kp",
              resume=tmp_path / "st" / "checkpoints" / "final.ckpt")


def test_non_finite_weights(tmp_path, small_bundles, tiny):
    config = tiny()
    train_set, val_set = prepare_windows(config, small_bundles)
    trainer = Trainer(config, train_set, val_set, small_geometry, tmp_path)
    trainer.model.head.W_o.data[0, 0] = np.nan
    with pytest.raises(TrainingError, match="epoch 1, step 1: non-finite values in prediction"):
        trainer.run()


def test_windows_shorter_than_recordings(small_bundles, tiny):
    with pytest.raises(ConfigError, match="shorter than one window"):
        prepare_windows(tiny(train_length=500), small_bundles)


def test_load_trained(tmp_path, small_bundles, tiny):
    config = tiny()
    result = train(config, small_bundles, tmp_path)
    model, loaded, geometry = load_trained(result.checkpoints["final"])
    assert loaded == config
    assert geometry == small_geometry
    assert not model.training

    state = load_checkpoint(result.checkpoints["final"]).model
    for name, value in model.state_dict().items():
        np.testing.assert_array_equal(value, state[name])


@pytest.fixture(scope="module")
def four_second_bundles():
    return generate_dataset(8, 7, small_trajectory._replace(duration=4.0), small_events,
                            small_geometry)


@pytest.mark.slow
@pytest.mark.parametrize("model", ["spatiotemporal", "knightpupil"])
def test_halves_the_centre_baseline(tmp_path, four_second_bundles, model):
    config = tiny_config(model, epochs=50, lr=0.005, batch_size=16)
    result = train(config, four_second_bundles, tmp_path)

    _, val_set = prepare_windows(config, four_second_bundles)
    baseline = constant_baseline(pixel_coordinates(val_set.targets(), small_geometry),
                                 small_geometry)
    assert result.history[-1].val_dist <= 0.5 * baseline


@pytest.mark.slow
def test_knightpupil_loss_goes_down(tmp_path, small_bundles):
    result = train(tiny_config("knightpupil", epochs=20), small_bundles, tmp_path)
    losses = [r.train_loss for r in result.history]
    assert np.mean(losses[-3:]) < losses[0]


@pytest.mark.slow
def test_sparsity_grows_with_the_penalty(tmp_path, small_bundles):
    sparsity = list()
    for lam in (0.0, 1e-4, 1e-3):
        config = tiny_config(epochs=5, sparsity_lambda=lam)
        train_set, val_set = prepare_windows(config, small_bundles)
        trainer = Trainer(config, train_set, val_set, small_geometry, tmp_path / str(lam))
        trainer.run()
        sparsity.append(trainer.sparsity)
    assert sparsity[0] <= sparsity[1] <= sparsity[2]
    assert sparsity[2] > sparsity[0]
