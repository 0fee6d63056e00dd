"""Compound scaling of a convolutional backbone.

Depth, width and input resolution grow together with one coefficient phi:
d = alpha^phi * d0, w = beta^phi * w0, r = gamma^phi * r0.
"""

from typing import NamedTuple

from evdata.base import ConfigError


class ScalingCoefficients(NamedTuple):
    phi: float = 1.8
    alpha: float = 1.2
    beta: float = 1.1
    gamma: float = 1.15
    d0: int = 2        # blocks per stage
    w0: int = 16       # channels of the first stage
    r0: int = 60       # input rows

    def validate(self):
        if min(self.alpha, self.beta, self.gamma) < 1:
            raise ConfigError(f"scaling bases must be >= 1, got alpha={self.alpha} "
                              f"beta={self.beta} gamma={self.gamma}")
        if self.phi < 0:
            raise ConfigError(f"compound coefficient must be >= 0, got {self.phi}")
        if min(self.d0, self.w0, self.r0) < 1:
            raise ConfigError("base depth, width and resolution must be >= 1")
        return self


class ScaledDims(NamedTuple):
    depth: int
    width: int
    resolution: int


def compound_scale(coeffs):
    """(d, w, r), each rounded to the nearest integer and at least 1"""

    c = coeffs.validate()
    return ScaledDims(
        max(1, round(c.alpha ** c.phi * c.d0)),
        max(1, round(c.beta ** c.phi * c.w0)),
        max(1, round(c.gamma ** c.phi * c.r0)),
    )
