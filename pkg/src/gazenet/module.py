"""Parameter containers.

A `Module` finds its parameters, buffers and sub-modules by looking at its
attributes in definition order, so the dotted names used in checkpoints follow
the order in which a model builds its layers.
"""

import numpy as np

from evdata.base import derive_seed

from .tensor import Tensor, ShapeError


class Parameter(Tensor):

    def __init__(self, data, name=None):
        super().__init__(data, requires_grad=True, name=name)


def uniform_init(rng, shape, fan_in):
    """Uniform in +-1/sqrt(fan_in)"""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:

    def __init__(self):
        self.training = True
        self._buffers = dict()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def register_buffer(self, name, array):
        """Non-trainable state that is checkpointed (running statistics etc.)"""
        self._buffers[name] = np.asarray(array, dtype=np.float64)

    def buffer(self, name):
        return self._buffers[name]

    def children(self):
        for key, value in vars(self).items():
            if isinstance(value, Module):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{key}.{i}", item

    def named_modules(self, prefix=""):
        yield prefix, self
        for key, child in self.children():
            yield from child.named_modules(f"{prefix}.{key}" if prefix else key)

    def named_parameters(self):
        for prefix, module in self.named_modules():
            for key, value in vars(module).items():
                if isinstance(value, Parameter):
                    yield (f"{prefix}.{key}" if prefix else key), value

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self):
        for prefix, module in self.named_modules():
            for key, value in module._buffers.items():
                yield (f"{prefix}.{key}" if prefix else key), module, key

    def parameter_count(self):
        return int(sum(p.size for p in self.parameters()))

    def train(self, mode=True):
        for _, module in self.named_modules():
            module.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def reseed(self, seed):
        """Give every randomised sub-module its own generator derived from `seed`."""
        for name, module in self.named_modules():
            if hasattr(module, "rng"):
                module.rng = np.random.default_rng(derive_seed(seed, f"dropout/{name}"))

    def state_dict(self):
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        for name, module, key in self.named_buffers():
            state[name] = module._buffers[key].copy()
        return state

    def load_state_dict(self, state):
        params = dict(self.named_parameters())
        buffers = {name: (module, key) for name, module, key in self.named_buffers()}

        missing = (set(params) | set(buffers)) - set(state)
        unexpected = set(state) - set(params) - set(buffers)
        if missing or unexpected:
            raise KeyError(f"state does not match the model: missing {sorted(missing)}, "
                           f"unexpected {sorted(unexpected)}")

        for name, value in state.items():
            value = np.asarray(value, dtype=np.float64)
            if name in params:
                target = params[name].data
            else:
                module, key = buffers[name]
                target = module._buffers[key]
            if target.shape != value.shape:
                raise ShapeError(f"{name}: checkpoint shape {value.shape}, "
                                 f"model shape {target.shape}")
            target[...] = value
