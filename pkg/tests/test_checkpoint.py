import numpy as np
import pytest

from evdata.base import FormatError
from evdata.container import encode_tensors
from gazenet.checkpoint import save_checkpoint, load_checkpoint, encode_checkpoint
from gazenet.models import build_model
from evtk.optim import Adam

from conftest import mini_spatiotemporal


def test_round_trip(tmp_path):
    model = build_model("spatiotemporal", mini_spatiotemporal, seed=4)
    optimizer = Adam(model.named_parameters(), lr=0.01)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, model, optimizer, dict(kind="spatiotemporal", epoch=3))

    ckpt = load_checkpoint(path)
    assert ckpt.meta["kind"] == "spatiotemporal"
    assert ckpt.meta["epoch"] == 3
    assert set(ckpt.model) == set(model.state_dict())
    for name, value in model.state_dict().items():
        np.testing.assert_array_equal(ckpt.model[name], value)
    assert set(ckpt.optimizer) == set(optimizer.state_dict())

    restored = build_model("spatiotemporal", mini_spatiotemporal, seed=99)
    restored.load_state_dict(ckpt.model)
    for name, value in restored.state_dict().items():
        np.testing.assert_array_equal(value, model.state_dict()[name])


def test_without_optimizer(tmp_path):
    model = build_model("spatiotemporal", mini_spatiotemporal)
    save_checkpoint(tmp_path / "m.ckpt", model)
    assert load_checkpoint(tmp_path / "m.ckpt").optimizer == {}


def test_encoding_is_deterministic():
    state = build_model("spatiotemporal", mini_spatiotemporal, seed=4).state_dict()
    assert encode_checkpoint(state, meta=dict(a=1)) == encode_checkpoint(state, meta=dict(a=1))


def test_rejects_foreign_containers(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(encode_tensors(dict(weights=np.ones(3))))
    with pytest.raises(FormatError, match="no meta"):
        load_checkpoint(path)

    path.write_bytes(encode_tensors(dict(meta=np.frombuffer(b'{"checkpoint_version": 7}',
                                                             dtype=np.uint8))))
    with pytest.raises(FormatError, match="version"):
        load_checkpoint(path)

    data = encode_checkpoint(dict(w=np.ones(2)))
    path.write_bytes(data[:-3])
    with pytest.raises(FormatError):
        load_checkpoint(path)
