import numpy as np
import pytest

from gazenet.gradcheck import gradcheck, check_tensors
from gazenet.layers import (BatchNorm2d, GroupNorm, Dropout, LinearHead, Conv2d,
                            CausalTemporalConv, l1_activation_penalty, make_norm)
from gazenet.module import Parameter
from gazenet.tensor import Tensor, ShapeError


def test_batch_norm_constant_channel():
    bn = BatchNorm2d(2)
    x = np.random.default_rng(0).standard_normal((4, 2, 3, 3))
    x[:, 1] = 7.0
    out = bn(Tensor(x)).data
    np.testing.assert_allclose(out[:, 1], 0.0, atol=1e-12)
    assert abs(out[:, 0].mean()) < 1e-12
    assert out[:, 0].var() == pytest.approx(1.0, rel=1e-3)


def test_batch_norm_running_statistics():
    bn = BatchNorm2d(1, momentum=0.5)
    x = np.arange(8.0).reshape(2, 1, 2, 2)
    bn(Tensor(x))
    assert bn.buffer("running_mean")[0] == pytest.approx(0.5 * 3.5)
    assert bn.buffer("running_var")[0] == pytest.approx(0.5 * 1 + 0.5 * x.var(ddof=1))

    bn.eval()
    out = bn(Tensor(x)).data
    mean, var = bn.buffer("running_mean")[0], bn.buffer("running_var")[0]
    np.testing.assert_allclose(out, (x - mean) / np.sqrt(var + bn.eps))


def test_batch_norm_empty_batch():
    with pytest.raises(ShapeError):
        BatchNorm2d(2)(Tensor(np.zeros((0, 2, 3, 3))))


def test_group_norm_constant_group():
    gn = GroupNorm(2, 4)
    x = np.random.default_rng(1).standard_normal((3, 4, 2, 2))
    x[:, 2:] = -1.5
    out = gn(Tensor(x)).data
    np.testing.assert_allclose(out[:, 2:], 0.0, atol=1e-12)
    # same in evaluation mode
    np.testing.assert_array_equal(gn.eval()(Tensor(x)).data, out)


def test_group_norm_bad_groups():
    with pytest.raises(ShapeError):
        GroupNorm(3, 4)
    with pytest.raises(ValueError):
        make_norm("ln", 4, 2)


def test_norm_gradients():
    rng = np.random.default_rng(3)
    for norm in (BatchNorm2d(3), GroupNorm(3, 6)):
        c = len(norm.gamma.data)
        norm.gamma.data = rng.uniform(0.5, 1.5, c)
        norm.beta.data = rng.standard_normal(c)
        for shape in ((4, c, 3, 3), (2, c, 2, 5)):
            err = gradcheck(norm, [shape], seeds=range(5),
                            params=dict(gamma=norm.gamma, beta=norm.beta))
            assert err < 1e-6, type(norm).__name__


def test_head_zero_weights(rng):
    head = LinearHead(5, rng)
    head.W_o.data[...] = 0.0
    head.b_o.data[...] = [1.5, -2.0]
    out = head(Tensor(rng.standard_normal((2, 7, 5)))).data
    np.testing.assert_array_equal(out, np.broadcast_to([1.5, -2.0], (2, 7, 2)))


def test_head_passthrough(rng):
    head = LinearHead(2, rng)
    head.W_o.data[...] = np.eye(2)
    head.b_o.data[...] = [1.0, 2.0]
    x = rng.standard_normal((3, 2))
    np.testing.assert_allclose(head(Tensor(x)).data, x + [1.0, 2.0])


def test_head_feature_mismatch(rng):
    with pytest.raises(ShapeError):
        LinearHead(3, rng)(Tensor(np.zeros((1, 4))))


@pytest.mark.parametrize("shape", [(2, 5, 6), (7, 3)])
def test_head_gradients(shape):
    head = LinearHead(shape[-1], np.random.default_rng(4))
    err = gradcheck(head, [shape], seeds=range(5),
                    params=dict(W_o=head.W_o, b_o=head.b_o))
    assert err < 1e-6


def test_dropout_modes(rng):
    drop = Dropout(0.5, np.random.default_rng(0))
    x = Tensor(np.ones(10_000))
    out = drop(x).data
    assert set(np.unique(out)) <= {0.0, 2.0}
    assert out.mean() == pytest.approx(1.0, abs=0.05)
    drop.eval()
    assert drop(x) is x
    with pytest.raises(ValueError):
        Dropout(1.0)


def test_penalty_examples():
    assert l1_activation_penalty([Tensor([1.0]), Tensor([-2.0])], 0.0).item() == 0.0
    assert l1_activation_penalty([Tensor([1.0]), Tensor([-2.0])], 0.5).item() == 1.5
    with pytest.raises(ValueError):
        l1_activation_penalty([Tensor([1.0])], -1.0)


def test_penalty_gradient_is_sign():
    a = Tensor(np.array([0.5, -2.0, 0.0]), requires_grad=True)
    l1_activation_penalty([a], 0.1).backward()
    np.testing.assert_allclose(a.grad, [0.1, -0.1, 0.0])


def test_layer_modules(rng):
    conv = Conv2d(2, 4, 3, rng, padding=1)
    assert conv(Tensor(np.zeros((1, 2, 5, 5)))).shape == (1, 4, 5, 5)
    assert [n for n, _ in conv.named_parameters()] == ["weight", "bias"]
    temporal = CausalTemporalConv(2, 3, 4, rng)
    assert temporal(Tensor(np.zeros((1, 6, 2, 1, 1)))).shape == (1, 6, 3, 1, 1)
    assert temporal.parameter_count() == 3 * 2 * 4 + 3
    with pytest.raises(ShapeError):
        CausalTemporalConv(2, 3, 0, rng)


def test_module_state_round_trip(rng):
    bn = BatchNorm2d(3)
    bn(Tensor(rng.standard_normal((2, 3, 2, 2))))
    state = bn.state_dict()
    other = BatchNorm2d(3)
    other.load_state_dict(state)
    for name, value in other.state_dict().items():
        np.testing.assert_array_equal(value, state[name])

    with pytest.raises(KeyError):
        other.load_state_dict({"gamma": state["gamma"]})
    bad = dict(state, gamma=np.ones(4))
    with pytest.raises(ShapeError):
        other.load_state_dict(bad)


def test_check_tensors_reports_each_tensor(rng):
    w = Parameter(rng.standard_normal((3, 2)))
    x = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
    errors = check_tensors(lambda: (x @ w.T).tanh(), dict(x=x, w=w), rng)
    assert set(errors) == {"x", "w"}
    assert max(errors.values()) < 1e-6
