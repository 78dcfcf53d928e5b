"""Shared parameter handling for the networks."""
import numpy as np

from ..autodiff import Tensor


def uniform_fan_in(rng, fan_in, fan_out):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Network:
    """Named parameters, non-trainable buffers and stable layer groups.

    Subclasses define ``forward(prepared, indices, training, rng)`` returning
    one prediction per selected sample, ``prepare(inputs)`` and
    ``layer_groups()``.
    """

    kind = "network"

    def __init__(self):
        self.params = {}

    def _add(self, name, value):
        self.params[name] = Tensor(value, requires_grad=True, name=name)

    def buffers(self):
        return {}

    def load_buffers(self, buffers):
        if buffers:
            raise KeyError(f"unexpected buffers {sorted(buffers)}")

    def state_dict(self):
        out = {name: p.data.copy() for name, p in self.params.items()}
        out.update({name: b.copy() for name, b in self.buffers().items()})
        return out

    def load_state_dict(self, state):
        state = dict(state)
        for name, p in self.params.items():
            if name not in state:
                raise KeyError(f"missing parameter {name!r}")
            value = np.asarray(state.pop(name), dtype=np.float64)
            if value.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {name}: {value.shape} vs {p.data.shape}")
            p.data = value.copy()
        self.load_buffers({k: state.pop(k) for k in list(state) if k in self.buffers()})
        if state:
            raise KeyError(f"unexpected tensors {sorted(state)}")

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def n_parameters(self):
        return sum(p.data.size for p in self.params.values())

    def predict(self, inputs, batch_size=64):
        prepared = self.prepare(inputs)
        n = len(prepared)
        out = [
            self.forward(prepared, np.arange(i, min(i + batch_size, n)), training=False).data
            for i in range(0, n, batch_size)
        ]
        return np.concatenate(out) if out else np.empty(0)
