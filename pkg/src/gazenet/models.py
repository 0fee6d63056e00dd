"""The two gaze regression networks.

Both map an N x T x C x H x W frame sequence to N x T x 2 pupil centres.

* Spatiotemporal net: causal blocks of temporal convolution followed by a
  strided depthwise spatial convolution, normalisation (alternating batch and
  group norm) and ReLU; global average pooling and a linear head per frame.
  Every operation after the temporal convolutions works frame by frame, so
  the whole network is causal and can run on a live stream.
* KnightPupil: a small depthwise-separable backbone sized by compound scaling
  encodes each voxel frame; a bidirectional GRU, the LTV-SSM transform and a
  linear head produce the per-step estimate.
"""

import logging
from typing import NamedTuple

import numpy as np

from evdata.base import ConfigError, derive_seed

from .layers import (Conv2d, CausalTemporalConv, BatchNorm2d, LinearHead,
                     make_norm)
from .module import Module
from .tensor import ShapeError
from .recurrent import BiGRU
from .scaling import ScalingCoefficients, compound_scale
from .ssm import LtvSsm

logger = logging.getLogger(__name__)

# softplus is the smooth stand-in used where finite differences must not hit a kink
activations = dict(relu=lambda x: x.relu(), softplus=lambda x: x.softplus())


class SpatiotemporalNetConfig(NamedTuple):
    in_channels: int = 1
    channels: tuple = (8, 16, 32)      # one block per entry
    temporal_kernel: int = 3
    spatial_kernel: int = 3
    spatial_stride: int = 2
    norm_schedule: tuple = ("bn", "gn")  # cycled over the blocks
    groups: int = 4
    sparsity_lambda: float = 1e-7     # per activation, summed over the batch
    head_dropout: float = 0.0
    activation: str = "relu"

    @property
    def blocks(self):
        return len(self.channels)

    def norm_of(self, i):
        return self.norm_schedule[i % len(self.norm_schedule)]

    def validate(self):
        if self.blocks < 1:
            raise ConfigError("the spatiotemporal net needs at least one block")
        if self.temporal_kernel < 1 or self.spatial_kernel < 1:
            raise ConfigError("kernel lengths must be >= 1")
        if self.sparsity_lambda < 0:
            raise ConfigError(f"sparsity weight must be >= 0, got {self.sparsity_lambda}")
        if self.activation not in activations:
            raise ConfigError(f"unknown activation '{self.activation}'")
        for i, c in enumerate(self.channels):
            kind = self.norm_of(i)
            if kind not in ("bn", "gn"):
                raise ConfigError(f"unknown normalization '{kind}'")
            if kind == "gn" and c % self.groups:
                raise ConfigError(f"block {i}: {self.groups} groups do not divide {c} channels")
        return self


class KnightPupilConfig(NamedTuple):
    in_channels: int = 3
    scaling: ScalingCoefficients = ScalingCoefficients()
    stages: int = 3
    gru_hidden: int = 128
    gru_layers: int = 2
    gru_dropout: float = 0.3
    head_dropout: float = 0.3
    activation: str = "relu"

    def dims(self):
        return compound_scale(self.scaling)

    def stage_widths(self):
        w = self.dims().width
        return tuple(w * 2 ** s for s in range(self.stages))

    @property
    def features(self):
        """Per-frame feature size d emitted by the backbone"""
        return self.stage_widths()[-1]

    def validate(self):
        self.scaling.validate()
        if self.stages < 1 or self.gru_layers < 1 or self.gru_hidden < 1:
            raise ConfigError("stages, GRU layers and GRU hidden size must be >= 1")
        if not 0 <= self.gru_dropout < 1 or not 0 <= self.head_dropout < 1:
            raise ConfigError("dropout probabilities must be in [0, 1)")
        if self.activation not in activations:
            raise ConfigError(f"unknown activation '{self.activation}'")
        return self


def _check_input(x, channels):
    if x.ndim != 5 or x.shape[2] != channels:
        raise ShapeError(f"expected N x T x {channels} x H x W input, got {x.shape}")


class SpatiotemporalBlock(Module):

    def __init__(self, in_channels, out_channels, cfg, norm, rng):
        super().__init__()
        self.act = activations[cfg.activation]
        self.temporal = CausalTemporalConv(in_channels, out_channels, cfg.temporal_kernel, rng)
        self.spatial = Conv2d(out_channels, out_channels, cfg.spatial_kernel, rng,
                              stride=cfg.spatial_stride, padding=cfg.spatial_kernel // 2,
                              groups=out_channels)
        self.norm = make_norm(norm, out_channels, cfg.groups)

    def frame_forward(self, y):
        """Everything after the temporal convolution, on N x C x H x W frames"""
        return self.act(self.norm(self.spatial(y)))

    def forward(self, x):
        n, t = x.shape[:2]
        y = self.temporal(x)
        y = self.frame_forward(y.reshape(n * t, *y.shape[2:]))
        return y.reshape(n, t, *y.shape[1:])


class SpatiotemporalNet(Module):
    kind = "spatiotemporal"

    def __init__(self, cfg, rng):
        super().__init__()
        self.cfg = cfg
        self.blocks = list()
        c_in = cfg.in_channels
        for i, c in enumerate(cfg.channels):
            self.blocks.append(SpatiotemporalBlock(c_in, c, cfg, cfg.norm_of(i), rng))
            c_in = c
        self.head = LinearHead(c_in, rng, cfg.head_dropout)
        self.activations = list()

    def head_forward(self, y):
        """Global average pool of N x T x C x H x W block output, then the head"""
        return self.head(y.mean(axis=(3, 4)))

    def forward(self, x):
        _check_input(x, self.cfg.in_channels)
        self.activations = list()
        for block in self.blocks:
            x = block(x)
            self.activations.append(x)
        return self.head_forward(x)

    def penalty_terms(self):
        """Output of every block from the last forward pass, for the L1 sparsity term"""
        return list(self.activations)

    @property
    def sparsity_lambda(self):
        return self.cfg.sparsity_lambda


class SeparableBlock(Module):
    """Depthwise 3x3 conv, BN, activation, pointwise 1x1 conv, BN, activation"""

    def __init__(self, in_channels, out_channels, stride, act, rng):
        super().__init__()
        self.act = act
        self.depthwise = Conv2d(in_channels, in_channels, 3, rng, stride=stride,
                                padding=1, groups=in_channels, bias=False)
        self.bn1 = BatchNorm2d(in_channels)
        self.pointwise = Conv2d(in_channels, out_channels, 1, rng, bias=False)
        self.bn2 = BatchNorm2d(out_channels)

    def forward(self, x):
        x = self.act(self.bn1(self.depthwise(x)))
        return self.act(self.bn2(self.pointwise(x)))


class Backbone(Module):

    def __init__(self, cfg, rng):
        super().__init__()
        widths = cfg.stage_widths()
        depth = cfg.dims().depth
        self.act = act = activations[cfg.activation]
        self.stem = Conv2d(cfg.in_channels, widths[0], 3, rng, stride=2, padding=1, bias=False)
        self.stem_bn = BatchNorm2d(widths[0])
        self.stages = list()
        c_in = widths[0]
        for s, width in enumerate(widths):
            for i in range(depth):
                stride = 2 if s > 0 and i == 0 else 1
                self.stages.append(SeparableBlock(c_in, width, stride, act, rng))
                c_in = width

    def forward(self, x):
        x = self.act(self.stem_bn(self.stem(x)))
        for block in self.stages:
            x = block(x)
        return x.mean(axis=(2, 3))


class KnightPupil(Module):
    kind = "knightpupil"
    sparsity_lambda = 0.0

    def __init__(self, cfg, rng):
        super().__init__()
        self.cfg = cfg
        self.backbone = Backbone(cfg, rng)
        self.gru = BiGRU(cfg.features, cfg.gru_hidden, rng, cfg.gru_layers, cfg.gru_dropout)
        self.ssm = LtvSsm(self.gru.features, rng)
        self.head = LinearHead(self.gru.features, rng, cfg.head_dropout)

    def forward(self, x):
        _check_input(x, self.cfg.in_channels)
        n, t = x.shape[:2]
        feat = self.backbone(x.reshape(n * t, *x.shape[2:]))
        seq = self.gru(feat.reshape(n, t, -1))
        return self.head(self.ssm(seq))

    def penalty_terms(self):
        return list()


def build_spatiotemporal_net(cfg, seed=0):
    cfg.validate()
    model = SpatiotemporalNet(cfg, np.random.default_rng(derive_seed(seed, "init/spatiotemporal")))
    model.reseed(seed)
    logger.debug(f"spatiotemporal net: {cfg.blocks} blocks, {model.parameter_count()} parameters")
    return model


def build_knightpupil(cfg, seed=0):
    cfg.validate()
    model = KnightPupil(cfg, np.random.default_rng(derive_seed(seed, "init/knightpupil")))
    model.reseed(seed)
    d, w, r = cfg.dims()
    logger.debug(f"knightpupil: depth {d}/stage, widths {cfg.stage_widths()}, "
                 f"resolution {r}, {model.parameter_count()} parameters")
    return model


def spatiotemporal_parameter_count(cfg):
    """Closed-form parameter count of `build_spatiotemporal_net(cfg)`."""
    total = 0
    c_in = cfg.in_channels
    k, s = cfg.temporal_kernel, cfg.spatial_kernel
    for c in cfg.channels:
        total += c * c_in * k + c          # temporal conv
        total += c * s * s + c             # depthwise spatial conv
        total += 2 * c                     # norm affine
        c_in = c
    return total + 2 * c_in + 2            # head


def build_model(kind, cfg, seed=0):
    if kind == "spatiotemporal":
        return build_spatiotemporal_net(cfg, seed)
    if kind == "knightpupil":
        return build_knightpupil(cfg, seed)
    raise ConfigError(f"unknown model '{kind}'")
