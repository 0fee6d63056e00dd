"""Dense float64 tensors with reverse-mode differentiation.

Every operation that produces a `Tensor` from inputs that require gradients
records its inputs and a closure mapping the output gradient to one gradient
per input. `Tensor.backward` walks that graph in reverse topological order and
accumulates gradients into the leaves (tensors created directly, such as
parameters and inputs).
"""

import threading
from contextlib import contextmanager

import numpy as np

from evdata.base import EvtkError


class ShapeError(EvtkError, ValueError):
    pass


_state = threading.local()


def is_grad_enabled():
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Run operations without recording the graph (inference, optimizer steps)."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def as_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _is_basic(index):
    items = index if isinstance(index, tuple) else (index,)
    return all(i is Ellipsis or i is None or isinstance(i, (int, np.integer, slice))
               for i in items)


class Tensor:

    # make numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None

    @staticmethod
    def result(data, parents, backward):
        """New graph node; `backward(g)` returns one gradient (or None) per parent."""
        out = Tensor(data)
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    # ------------------------------------------------------------------
    # introspection

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def T(self):
        return self.transpose()

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        label = f" '{self.name}'" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------
    # differentiation

    def _topological(self):
        order, seen = list(), set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return order

    def backward(self, grad=None):
        if not self.requires_grad:
            raise RuntimeError("tensor does not require gradients")
        if grad is None:
            if self.size != 1:
                raise ShapeError(f"backward of a non-scalar tensor {self.shape} "
                                 f"needs an explicit gradient")
            grad = np.ones_like(self.data)

        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(self._topological()):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # ------------------------------------------------------------------
    # arithmetic

    def __add__(self, other):
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor.result(self.data + other.data, (self, other),
                             lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))

    __radd__ = __add__

    def __neg__(self):
        return Tensor.result(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor.result(self.data - other.data, (self, other),
                             lambda g: (_unbroadcast(g, a), -_unbroadcast(g, b)))

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor.result(x * y, (self, other),
                             lambda g: (_unbroadcast(g * y, x.shape),
                                        _unbroadcast(g * x, y.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor.result(x / y, (self, other),
                             lambda g: (_unbroadcast(g / y, x.shape),
                                        _unbroadcast(-g * x / (y * y), y.shape)))

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent):
        if isinstance(exponent, Tensor):
            raise TypeError("only constant exponents are supported")
        x = self.data
        return Tensor.result(x ** exponent, (self,),
                             lambda g: (g * exponent * x ** (exponent - 1),))

    def __matmul__(self, other):
        other = as_tensor(other)
        if self.ndim < 2 or other.ndim < 2:
            raise ShapeError(f"matmul needs operands of rank >= 2, got "
                             f"{self.shape} @ {other.shape}")
        if self.shape[-1] != other.shape[-2]:
            raise ShapeError(f"matmul inner dimensions differ: "
                             f"{self.shape} @ {other.shape}")
        x, y = self.data, other.data

        def backward(g):
            return (_unbroadcast(g @ np.swapaxes(y, -1, -2), x.shape),
                    _unbroadcast(np.swapaxes(x, -1, -2) @ g, y.shape))

        return Tensor.result(x @ y, (self, other), backward)

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    # ------------------------------------------------------------------
    # reductions and shape

    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape),)

        return Tensor.result(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if np.isscalar(axis) else axis
            count = int(np.prod([self.shape[a] for a in axes]))
        if count == 0:
            raise ShapeError(f"mean over an empty extent of {self.shape}")
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor.result(self.data.reshape(shape), (self,),
                             lambda g: (g.reshape(original),))

    def transpose(self, *axes):
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor.result(self.data.transpose(axes), (self,),
                             lambda g: (g.transpose(inverse),))

    def __getitem__(self, index):
        shape = self.shape

        def backward(g):
            full = np.zeros(shape)
            if _is_basic(index):
                full[index] += g
            else:
                np.add.at(full, index, g)
            return (full,)

        return Tensor.result(self.data[index], (self,), backward)

    # ------------------------------------------------------------------
    # elementwise functions

    def exp(self):
        e = np.exp(self.data)
        return Tensor.result(e, (self,), lambda g: (g * e,))

    def log(self):
        x = self.data
        return Tensor.result(np.log(x), (self,), lambda g: (g / x,))

    def sqrt(self):
        s = np.sqrt(self.data)
        return Tensor.result(s, (self,), lambda g: (g * 0.5 / s,))

    def tanh(self):
        t = np.tanh(self.data)
        return Tensor.result(t, (self,), lambda g: (g * (1 - t * t),))

    def sigmoid(self):
        s = 0.5 * (1 + np.tanh(0.5 * self.data))
        return Tensor.result(s, (self,), lambda g: (g * s * (1 - s),))

    def relu(self):
        mask = self.data > 0
        return Tensor.result(self.data * mask, (self,), lambda g: (g * mask,))

    def softplus(self):
        s = 0.5 * (1 + np.tanh(0.5 * self.data))
        return Tensor.result(np.logaddexp(0.0, self.data), (self,), lambda g: (g * s,))

    def abs(self):
        # subgradient 0 at 0
        sign = np.sign(self.data)
        return Tensor.result(np.abs(self.data), (self,), lambda g: (g * sign,))

    def clip(self, lo=None, hi=None):
        x = self.data
        inside = np.ones(x.shape, dtype=bool)
        if lo is not None:
            inside &= x >= lo
        if hi is not None:
            inside &= x <= hi
        return Tensor.result(np.clip(x, lo, hi), (self,), lambda g: (g * inside,))


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor.result(np.concatenate([t.data for t in tensors], axis=axis),
                         tuple(tensors), backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor.result(np.stack([t.data for t in tensors], axis=axis),
                         tuple(tensors), backward)


def first_nonfinite(named_tensors):
    """Name of the first tensor holding a NaN or infinity (data or gradient)."""
    for name, t in named_tensors:
        data = t.data if isinstance(t, Tensor) else np.asarray(t)
        if not np.all(np.isfinite(data)):
            return name
        if isinstance(t, Tensor) and t.grad is not None and not np.all(np.isfinite(t.grad)):
            return f"{name}.grad"
    return None
