"""Feed-forward regressor on fixed-width descriptors."""
from dataclasses import asdict, dataclass

import numpy as np

from ..autodiff import BatchNormState, Tensor, batch_norm, dropout, linear, make_rng, reshape, swish
from .base import Network, uniform_fan_in

MIN_HIDDEN = 8


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    n_layers: int = 2
    dropout_p: float = 0.3
    activation: str = "swish"
    lr: float = 0.00860

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if not 0 <= self.dropout_p < 1:
            raise ValueError("dropout_p must be in [0, 1)")
        if self.activation != "swish":
            raise ValueError(f"unsupported activation {self.activation!r}")

    def hidden_widths(self):
        return [max(MIN_HIDDEN, self.input_dim // 2 ** (i + 1)) for i in range(self.n_layers)]


class MLP(Network):
    """Linear -> batch norm -> swish per hidden layer, dropout after the first.

    Hidden widths halve from the input width with a floor of 8; the output
    layer is a single linear unit.
    """

    kind = "mlp"

    def __init__(self, config: MlpConfig, seed=0):
        super().__init__()
        self.config = config
        rng = make_rng(seed, "init")
        fan_in = config.input_dim
        self.bn = []
        for i, width in enumerate(config.hidden_widths()):
            self._add(f"layers.{i}.weight", uniform_fan_in(rng, fan_in, width))
            self._add(f"layers.{i}.bias", np.zeros(width))
            self._add(f"layers.{i}.bn.gamma", np.ones(width))
            self._add(f"layers.{i}.bn.beta", np.zeros(width))
            self.bn.append(BatchNormState(width))
            fan_in = width
        self._add("output.weight", uniform_fan_in(rng, fan_in, 1))
        self._add("output.bias", np.zeros(1))

    def config_dict(self):
        return asdict(self.config)

    def buffers(self):
        out = {}
        for i, st in enumerate(self.bn):
            out[f"layers.{i}.bn.running_mean"] = st.running_mean
            out[f"layers.{i}.bn.running_var"] = st.running_var
        return out

    def load_buffers(self, buffers):
        for i, st in enumerate(self.bn):
            st.running_mean = np.asarray(buffers[f"layers.{i}.bn.running_mean"], dtype=np.float64).copy()
            st.running_var = np.asarray(buffers[f"layers.{i}.bn.running_var"], dtype=np.float64).copy()

    def layer_groups(self):
        groups = [(f"layers.{i}", [n for n in self.params if n.startswith(f"layers.{i}.")])
                  for i in range(len(self.bn))]
        groups.append(("output", ["output.weight", "output.bias"]))
        return groups

    def prepare(self, inputs):
        X = np.asarray(inputs, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.config.input_dim:
            raise ValueError(f"expected (n, {self.config.input_dim}) inputs, got {X.shape}")
        return X

    def forward(self, prepared, indices, training=False, rng=None):
        h = Tensor(prepared[indices])
        # batch statistics need >= 2 rows; a lone row falls back to running stats
        bn_train = training and len(indices) > 1
        for i, st in enumerate(self.bn):
            p = self.params
            h = linear(h, p[f"layers.{i}.weight"], p[f"layers.{i}.bias"])
            h = batch_norm(h, p[f"layers.{i}.bn.gamma"], p[f"layers.{i}.bn.beta"], st, bn_train)
            h = swish(h)
            if i == 0:
                h = dropout(h, self.config.dropout_p, training, rng)
        out = linear(h, self.params["output.weight"], self.params["output.bias"])
        return reshape(out, (len(indices),))


def mlp_forward(config, params, x, training=False, rng=None):
    """Functional form: evaluate an MLP with the given named arrays."""
    net = MLP(config)
    for name, p in net.params.items():
        p.data = np.asarray(params[name], dtype=np.float64).copy()
    buffers = {k: v for k, v in params.items() if k in net.buffers()}
    if buffers:
        net.load_buffers(buffers)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return net.forward(net.prepare(x), np.arange(len(x)), training, rng)
