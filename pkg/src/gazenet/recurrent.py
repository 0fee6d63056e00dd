"""Gated recurrent units and the bidirectional stack.

One GRU step, for input x_t and previous state h_{t-1}:

    r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
    z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
    h~_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
    h_t = (1 - z_t) * h_{t-1} + z_t * h~_t
"""

import numpy as np

from .layers import Dropout
from .module import Module, Parameter, uniform_init
from .tensor import Tensor, ShapeError, concat, stack


class GruParams(Module):

    gates = ("r", "z", "h")

    def __init__(self, inputs, hidden, rng):
        super().__init__()
        for g in self.gates:
            setattr(self, f"W_{g}", Parameter(uniform_init(rng, (hidden, inputs), inputs)))
        for g in self.gates:
            setattr(self, f"U_{g}", Parameter(uniform_init(rng, (hidden, hidden), hidden)))
        for g in self.gates:
            setattr(self, f"b_{g}", Parameter(np.zeros(hidden)))

    @property
    def inputs(self):
        return self.W_r.shape[1]

    @property
    def hidden(self):
        return self.W_r.shape[0]


def gru_cell(x_t, h_prev, params):
    """One step for a batch: x_t is N x inputs, h_prev N x hidden."""

    if x_t.shape[-1] != params.inputs or h_prev.shape[-1] != params.hidden:
        raise ShapeError(f"GRU cell for {params.inputs} inputs / {params.hidden} hidden "
                         f"got x {x_t.shape} and h {h_prev.shape}")
    p = params
    r = (x_t @ p.W_r.T + h_prev @ p.U_r.T + p.b_r).sigmoid()
    z = (x_t @ p.W_z.T + h_prev @ p.U_z.T + p.b_z).sigmoid()
    h_tilde = (x_t @ p.W_h.T + (r * h_prev) @ p.U_h.T + p.b_h).tanh()
    return (1 - z) * h_prev + z * h_tilde


def gru_sequence(x, params, reverse=False):
    """Run a GRU over N x T x inputs from a zero state; returns N x T x hidden."""

    n, t, _ = x.shape
    h = Tensor(np.zeros((n, params.hidden)))
    steps = range(t - 1, -1, -1) if reverse else range(t)
    outputs = [None] * t
    for i in steps:
        h = gru_cell(x[:, i], h, params)
        outputs[i] = h
    return stack(outputs, axis=1)


class BiGRU(Module):
    """Stacked bidirectional GRU; layer outputs concatenate forward and backward
    states, with dropout between layers."""

    def __init__(self, inputs, hidden, rng, layers=2, dropout=0.3):
        super().__init__()
        if layers < 1:
            raise ValueError(f"BiGRU needs at least one layer, got {layers}")
        self.forward_params = list()
        self.backward_params = list()
        for i in range(layers):
            size = inputs if i == 0 else 2 * hidden
            self.forward_params.append(GruParams(size, hidden, rng))
            self.backward_params.append(GruParams(size, hidden, rng))
        self.dropout = Dropout(dropout)
        self.hidden = hidden

    @property
    def features(self):
        return 2 * self.hidden

    def forward(self, x):
        for i, (fwd, bwd) in enumerate(zip(self.forward_params, self.backward_params)):
            if i > 0:
                x = self.dropout(x)
            x = concat([gru_sequence(x, fwd), gru_sequence(x, bwd, reverse=True)], axis=-1)
        return x
