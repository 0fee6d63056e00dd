"""Finite-difference verification of the analytic gradients."""

import logging

import numpy as np

from .tensor import Tensor

logger = logging.getLogger(__name__)


def relative_error(analytic, numeric, floor=1e-3):
    """max |a - n| scaled by the larger gradient magnitude (at least `floor`)"""
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0), floor)
    return float(np.max(np.abs(analytic - numeric), initial=0.0) / scale)


def check_tensors(fn, tensors, rng, h=1e-5, max_elements=None):
    """Compare gradients of a random projection of `fn()` for every tensor in `tensors`.

    `tensors` maps names to leaf tensors whose data `fn` reads. Returns
    a dict name -> relative error.
    """

    for t in tensors.values():
        t.data = np.ascontiguousarray(t.data)

    out = fn()
    weights = rng.standard_normal(out.shape)

    def objective():
        return float(np.sum(fn().data * weights))

    for t in tensors.values():
        t.grad = None
    (out * weights).sum().backward()
    analytic = {name: (t.grad if t.grad is not None else np.zeros(t.shape)).copy()
                for name, t in tensors.items()}

    errors = dict()
    for name, t in tensors.items():
        flat = t.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_elements is not None and flat.size > max_elements:
            indices = np.sort(rng.choice(flat.size, max_elements, replace=False))

        numeric = np.zeros(len(indices))
        for j, i in enumerate(indices):
            saved = flat[i]
            flat[i] = saved + h
            f_plus = objective()
            flat[i] = saved - h
            f_minus = objective()
            flat[i] = saved
            numeric[j] = (f_plus - f_minus) / (2 * h)

        errors[name] = relative_error(analytic[name].reshape(-1)[indices], numeric)
        logger.debug(f"gradcheck {name}: {errors[name]:.3g}")

    return errors


def gradcheck(op, shapes, seeds=(0,), params=None, h=1e-5, max_elements=None):
    """Worst relative gradient error of `op` over random inputs of `shapes`.

    For every seed, inputs are drawn from a standard normal distribution;
    `params` (name -> leaf tensor) are checked along with the inputs.
    """

    worst = 0.0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        inputs = [Tensor(rng.standard_normal(shape), requires_grad=True) for shape in shapes]
        tensors = {f"input{i}": t for i, t in enumerate(inputs)}
        tensors.update(params or {})
        errors = check_tensors(lambda: op(*inputs), tensors, rng, h, max_elements)
        worst = max(worst, max(errors.values()))
    return worst
