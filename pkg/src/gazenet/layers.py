import numpy as np

from .module import Module, Parameter, uniform_init
from .ops import conv2d, causal_temporal_conv
from .tensor import Tensor, ShapeError


class Conv2d(Module):

    def __init__(self, in_channels, out_channels, kernel, rng, stride=1, padding=0,
                 groups=1, bias=True):
        super().__init__()
        if in_channels % groups or out_channels % groups:
            raise ShapeError(f"{groups} groups do not divide {in_channels} -> {out_channels} channels")
        fan_in = in_channels // groups * kernel * kernel
        self.weight = Parameter(uniform_init(
            rng, (out_channels, in_channels // groups, kernel, kernel), fan_in))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None
        self.stride = stride
        self.padding = padding
        self.groups = groups

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class CausalTemporalConv(Module):
    """Temporal convolution over N x T x C x H x W that never looks ahead."""

    def __init__(self, in_channels, out_channels, kernel, rng, bias=True):
        super().__init__()
        if kernel < 1:
            raise ShapeError(f"temporal kernel length must be >= 1, got {kernel}")
        self.weight = Parameter(uniform_init(
            rng, (out_channels, in_channels, kernel), in_channels * kernel))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None
        self.kernel = kernel

    def forward(self, x):
        return causal_temporal_conv(x, self.weight, self.bias)


class BatchNorm2d(Module):
    """Batch normalisation of N x C x H x W input.

    Training mode normalises with the batch statistics and updates the running
    estimates; evaluation mode uses the running estimates only.
    """

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        super().__init__()
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.momentum = momentum
        self.eps = eps
        self.register_buffer("running_mean", np.zeros(channels))
        self.register_buffer("running_var", np.ones(channels))

    def forward(self, x):
        if x.ndim != 4:
            raise ShapeError(f"batch norm expects N x C x H x W, got {x.shape}")
        if x.shape[0] * x.shape[2] * x.shape[3] == 0:
            raise ShapeError("batch norm over an empty batch")

        shape = (1, -1, 1, 1)
        if self.training:
            mean = x.mean(axis=(0, 2, 3), keepdims=True)
            centred = x - mean
            var = (centred * centred).mean(axis=(0, 2, 3), keepdims=True)
            xhat = centred / (var + self.eps).sqrt()

            count = x.shape[0] * x.shape[2] * x.shape[3]
            unbiased = var.data.reshape(-1) * count / max(count - 1, 1)
            m = self.momentum
            self._buffers["running_mean"] = (1 - m) * self.buffer("running_mean") + m * mean.data.reshape(-1)
            self._buffers["running_var"] = (1 - m) * self.buffer("running_var") + m * unbiased
        else:
            mean = self.buffer("running_mean").reshape(shape)
            var = self.buffer("running_var").reshape(shape)
            xhat = (x - mean) * (1.0 / np.sqrt(var + self.eps))

        return xhat * self.gamma.reshape(shape) + self.beta.reshape(shape)


class GroupNorm(Module):
    """Per-sample normalisation over groups of channels; same in train and eval."""

    def __init__(self, groups, channels, eps=1e-5):
        super().__init__()
        if groups < 1 or channels % groups:
            raise ShapeError(f"{groups} groups do not divide {channels} channels")
        self.groups = groups
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.eps = eps

    def forward(self, x):
        n, c, h, w = x.shape
        if n == 0:
            raise ShapeError("group norm over an empty batch")
        xg = x.reshape(n, self.groups, c // self.groups, h, w)
        mean = xg.mean(axis=(2, 3, 4), keepdims=True)
        centred = xg - mean
        var = (centred * centred).mean(axis=(2, 3, 4), keepdims=True)
        xhat = (centred / (var + self.eps).sqrt()).reshape(n, c, h, w)
        shape = (1, -1, 1, 1)
        return xhat * self.gamma.reshape(shape) + self.beta.reshape(shape)


def make_norm(kind, channels, groups):
    if kind == "bn":
        return BatchNorm2d(channels)
    if kind == "gn":
        return GroupNorm(groups, channels)
    raise ValueError(f"unknown normalization '{kind}'")


class Dropout(Module):
    """Inverted dropout: scaled by 1/(1-p) in training, identity in evaluation."""

    def __init__(self, p, rng=None):
        super().__init__()
        if not 0 <= p < 1:
            raise ValueError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def forward(self, x):
        if not self.training or self.p == 0:
            return x
        mask = (self.rng.random(x.shape) >= self.p) / (1 - self.p)
        return x * mask


class LinearHead(Module):
    """Y = W_o x + b_o per step, with dropout in front."""

    def __init__(self, features, rng, dropout=0.0, outputs=2):
        super().__init__()
        self.dropout = Dropout(dropout)
        self.W_o = Parameter(uniform_init(rng, (outputs, features), features))
        self.b_o = Parameter(np.zeros(outputs))

    def forward(self, x):
        if x.shape[-1] != self.W_o.shape[1]:
            raise ShapeError(f"head expects {self.W_o.shape[1]} features, got {x.shape[-1]}")
        return self.dropout(x) @ self.W_o.T + self.b_o


def l1_activation_penalty(activations, lam):
    """lam * sum |a| over the given activation tensors (subgradient 0 at 0)."""

    if lam < 0:
        raise ValueError(f"sparsity weight must be >= 0, got {lam}")
    if lam == 0 or not activations:
        return Tensor(0.0)
    total = None
    for a in activations:
        s = a.abs().sum()
        total = s if total is None else total + s
    return total * lam
