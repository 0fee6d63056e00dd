"""Linear time-varying state-space transform.

Per step, from the input h_t:

    (delta_t, B_t) = P h_t + b_P
    dA_t = exp(delta_t)            elementwise
    dB_t = delta_t * B_t
    h'_t = dA_t * h_t + dB_t
    y_t  = C h'_t + D h_t          D fixed to the identity

The transition terms depend on the current input only; there is no carried
state between steps, so steps can be computed in one batched pass.
"""

import numpy as np

from .module import Module, Parameter, uniform_init
from .tensor import ShapeError


class LtvSsmParams(Module):

    def __init__(self, state, rng, outputs=None):
        super().__init__()
        outputs = state if outputs is None else outputs
        if outputs != state:
            # y = C h' + D h only type-checks with C: state -> state
            raise ShapeError(f"LTV-SSM output size {outputs} must equal the state size {state}")
        self.proj_weight = Parameter(uniform_init(rng, (2 * state, state), state))
        self.proj_bias = Parameter(np.zeros(2 * state))
        self.C = Parameter(uniform_init(rng, (outputs, state), state))
        self.register_buffer("D", np.eye(state))

    @property
    def state(self):
        return self.C.shape[1]


def ltv_ssm(h, params):
    """Apply the transform to N x T x state (or T x state) input."""

    if h.shape[-1] != params.state:
        raise ShapeError(f"LTV-SSM expects {params.state} features, got {h.shape[-1]}")
    s = params.state
    proj = h @ params.proj_weight.T + params.proj_bias
    delta = proj[..., :s]
    B = proj[..., s:]
    dA = delta.exp()
    dB = delta * B
    h_prime = dA * h + dB
    return h_prime @ params.C.T + h @ params.buffer("D").T


class LtvSsm(Module):

    def __init__(self, state, rng):
        super().__init__()
        self.params = LtvSsmParams(state, rng)

    def forward(self, h):
        return ltv_ssm(h, self.params)
