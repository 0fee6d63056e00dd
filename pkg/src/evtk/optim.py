"""Adam / AdamW and learning-rate schedules."""

import math

import numpy as np


class Adam:
    """Adam with bias correction.

    `decoupled=True` gives AdamW: the weights shrink by lr * weight_decay
    before the Adam update instead of adding the decay to the gradient.
    Parameters without a gradient are skipped.
    """

    def __init__(self, named_params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.0, decoupled=False):
        self.params = list(named_params)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.weight_decay = weight_decay
        self.decoupled = decoupled
        self.step_count = 0
        self.m = {name: np.zeros(p.shape) for name, p in self.params}
        self.v = {name: np.zeros(p.shape) for name, p in self.params}

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        b1, b2 = self.betas
        self.step_count += 1
        c1 = 1 - b1 ** self.step_count
        c2 = 1 - b2 ** self.step_count

        for name, p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay:
                if self.decoupled:
                    p.data -= lr * self.weight_decay * p.data
                else:
                    g = g + self.weight_decay * p.data

            m = self.m[name] = b1 * self.m[name] + (1 - b1) * g
            v = self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        for _, p in self.params:
            p.grad = None

    def state_dict(self):
        state = {"step": np.array([self.step_count], dtype=np.int64)}
        for name, _ in self.params:
            state[f"m/{name}"] = self.m[name].copy()
            state[f"v/{name}"] = self.v[name].copy()
        return state

    def load_state_dict(self, state):
        self.step_count = int(state["step"][0])
        for name, p in self.params:
            m, v = state[f"m/{name}"], state[f"v/{name}"]
            if m.shape != p.shape or v.shape != p.shape:
                raise ValueError(f"optimizer state for {name} has shape {m.shape}, "
                                 f"parameter has {p.shape}")
            self.m[name] = np.array(m, dtype=np.float64)
            self.v[name] = np.array(v, dtype=np.float64)


def AdamW(named_params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
    return Adam(named_params, lr, betas, eps, weight_decay, decoupled=True)


def make_optimizer(model, cfg):
    decoupled = cfg.optimizer == "adamw"
    return Adam(model.named_parameters(), cfg.lr, cfg.betas, cfg.eps,
                cfg.weight_decay, decoupled=decoupled)


def warmup_steps(total, fraction=0.025):
    return max(1, math.ceil(fraction * total))


def lr_schedule(kind, step, total=None, warmup_fraction=0.025, step_size=200, gamma=0.5):
    """Learning-rate multiplier.

    cosine: linear 0 -> 1 over the warmup steps, then 1/2 (1 + cos(pi * progress))
    over the rest of `total` steps.
    step: gamma ** floor(step / step_size), with `step` counted in epochs.
    """

    if kind == "constant":
        return 1.0

    if kind == "step":
        return gamma ** (step // step_size)

    if kind == "cosine":
        if total is None or total < 1:
            raise ValueError("cosine schedule needs the total number of steps")
        warm = warmup_steps(total, warmup_fraction)
        if step < warm:
            return step / warm
        progress = min(1.0, (step - warm) / max(1, total - warm))
        return 0.5 * (1 + math.cos(math.pi * progress))

    raise ValueError(f"unknown schedule '{kind}'")
