import math

import numpy as np
import pytest

from evtk.optim import Adam, AdamW, lr_schedule, warmup_steps
from gazenet.module import Parameter


def params(*arrays):
    return [(f"p{i}", Parameter(np.array(a, dtype=np.float64))) for i, a in enumerate(arrays)]


def test_zero_gradient_leaves_parameters():
    named = params([1.0, -2.0])
    p = named[0][1]
    p.grad = np.zeros(2)
    Adam(named, lr=0.1).step()
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_missing_gradient_is_skipped():
    named = params([1.0])
    opt = Adam(named, lr=0.1)
    opt.step()
    assert named[0][1].data[0] == 1.0


def test_first_step_moves_by_lr():
    named = params([1.0, 1.0, 1.0])
    p = named[0][1]
    p.grad = np.array([3.0, -0.5, 1e-3])
    Adam(named, lr=0.01).step()
    np.testing.assert_allclose(p.data, 1.0 - 0.01 * np.array([1.0, -1.0, 1.0]), rtol=1e-5)


def test_coupled_weight_decay_enters_the_gradient():
    named = params([2.0])
    p = named[0][1]
    p.grad = np.array([0.0])
    Adam(named, lr=0.1, weight_decay=0.5).step()
    # g = 0 + 0.5 * 2, a full Adam step against it
    assert p.data[0] == pytest.approx(1.9, rel=1e-6)


def test_decoupled_weight_decay():
    named = params([2.0])
    p = named[0][1]
    p.grad = np.array([0.0])
    AdamW(named, lr=0.1, weight_decay=0.5).step()
    # shrink by lr * decay, then an Adam step with a zero gradient
    assert p.data[0] == pytest.approx(2.0 * (1 - 0.05))


def test_lr_override():
    named = params([0.0])
    p = named[0][1]
    opt = Adam(named, lr=1.0)
    p.grad = np.array([1.0])
    opt.step(lr=0.001)
    assert p.data[0] == pytest.approx(-0.001, rel=1e-5)


def test_state_round_trip():
    named = params([1.0, 2.0], [[3.0]])
    opt = Adam(named, lr=0.1)
    for _ in range(3):
        for _, p in named:
            p.grad = np.ones(p.shape)
        opt.step()

    other = Adam(params([1.0, 2.0], [[3.0]]), lr=0.1)
    other.load_state_dict(opt.state_dict())
    assert other.step_count == 3
    for name, _ in named:
        np.testing.assert_array_equal(other.m[name], opt.m[name])
        np.testing.assert_array_equal(other.v[name], opt.v[name])

    with pytest.raises(ValueError):
        Adam(params([1.0], [[3.0]]), lr=0.1).load_state_dict(opt.state_dict())


def test_warmup_steps():
    assert warmup_steps(1000) == 25
    assert warmup_steps(10) == 1


def test_cosine_schedule():
    total = 1000
    warm = warmup_steps(total)
    assert lr_schedule("cosine", 0, total) == 0.0
    assert lr_schedule("cosine", warm, total) == 1.0
    assert lr_schedule("cosine", warm + (total - warm) // 2, total) == pytest.approx(0.5, abs=1e-2)
    assert lr_schedule("cosine", total, total) == pytest.approx(0.0, abs=1e-12)
    assert lr_schedule("cosine", warm // 2, total) == pytest.approx((warm // 2) / warm)
    with pytest.raises(ValueError):
        lr_schedule("cosine", 0)


def test_cosine_midpoint_exact():
    total, warm = 201, warmup_steps(201)
    mid = warm + (total - warm) / 2
    assert lr_schedule("cosine", mid, total) == pytest.approx(0.5 * (1 + math.cos(math.pi / 2)))


@pytest.mark.parametrize("epoch, factor", [(0, 1.0), (199, 1.0), (200, 0.5), (399, 0.5),
                                           (400, 0.25)])
def test_step_schedule(epoch, factor):
    assert lr_schedule("step", epoch) == factor


def test_unknown_schedule():
    assert lr_schedule("constant", 17) == 1.0
    with pytest.raises(ValueError):
        lr_schedule("linear", 0)


def test_adamw_without_decay_is_adam():
    rng = np.random.default_rng(3)
    a, b = params(rng.standard_normal(4)), params(rng.standard_normal(4))
    b[0][1].data[...] = a[0][1].data
    opt_a, opt_b = Adam(a, lr=0.01), AdamW(b, lr=0.01, weight_decay=0.0)
    for _ in range(5):
        g = rng.standard_normal(4)
        a[0][1].grad, b[0][1].grad = g, g.copy()
        opt_a.step()
        opt_b.step()
    np.testing.assert_array_equal(a[0][1].data, b[0][1].data)
