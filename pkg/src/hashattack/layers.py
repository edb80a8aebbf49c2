"""Dense feed-forward building blocks on top of the gradient tape."""

import numpy as np

from . import tensor as T
from .errors import DimensionError, InputError

_ACTIVATIONS = {
    "linear": lambda t: t,
    "relu": T.relu,
    "tanh": T.tanh,
    "sigmoid": T.sigmoid,
}

# Untraced twins, numerically identical to the tape ops (same clamps).
_ACTIVATION_VALUES = {
    "linear": lambda v: v,
    "relu": lambda v: np.maximum(v, 0.0),
    "tanh": T.tanh_values,
    "sigmoid": T.sigmoid_values,
}


class DenseLayer:
    """One affine map plus a fixed elementwise activation."""

    def __init__(self, weight, bias, activation):
        if activation not in _ACTIVATIONS:
            raise InputError(f"unknown activation {activation!r}")
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.ndim != 1 or weight.shape[1] != bias.shape[0]:
            raise DimensionError(
                f"layer needs weight (in, out) and bias (out,), got {weight.shape} and {bias.shape}"
            )
        self.weight = T.Tensor(weight)
        self.bias = T.Tensor(bias)
        self.activation = activation

    @classmethod
    def create(cls, rng, fan_in, fan_out, activation):
        """Initialize weights for the given activation; biases start at zero.

        relu layers draw from a normal with variance 2/fan_in; saturating
        and linear layers draw uniformly with the symmetric limit
        sqrt(6 / (fan_in + fan_out)).
        """
        if fan_in <= 0 or fan_out <= 0:
            raise DimensionError(f"layer widths must be positive, got {fan_in} and {fan_out}")
        if activation == "relu":
            weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weight = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        return cls(weight, np.zeros(fan_out), activation)

    def forward(self, x):
        pre = T.bias_add(T.matmul(x, self.weight), self.bias)
        return _ACTIVATIONS[self.activation](pre)


class MLP:
    """A stack of dense layers applied in order to row-major batches."""

    def __init__(self, layers):
        layers = list(layers)
        if not layers:
            raise DimensionError("a network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.weight.shape[1] != nxt.weight.shape[0]:
                raise DimensionError(
                    f"consecutive layers disagree: {prev.weight.shape} feeds {nxt.weight.shape}"
                )
        self.layers = layers

    @classmethod
    def create(cls, rng, widths, activations):
        """Build from ``widths`` = [in, hidden..., out] and one activation per layer."""
        if len(widths) < 2:
            raise DimensionError(f"widths must name input and output at least, got {widths}")
        if len(activations) != len(widths) - 1:
            raise DimensionError(
                f"{len(widths) - 1} layers need as many activations, got {len(activations)}"
            )
        layers = [
            DenseLayer.create(rng, fan_in, fan_out, act)
            for fan_in, fan_out, act in zip(widths, widths[1:], activations)
        ]
        return cls(layers)

    @property
    def input_width(self):
        return self.layers[0].weight.shape[0]

    @property
    def output_width(self):
        return self.layers[-1].weight.shape[1]

    def forward(self, x):
        x = T._as_tensor(x)
        if x.values.ndim != 2 or x.values.shape[1] != self.input_width:
            raise DimensionError(
                f"expected input (batch, {self.input_width}), got {x.values.shape}"
            )
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward_values(self, x):
        """Untraced forward pass on a plain array; matches ``forward`` bit for bit."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_width:
            raise DimensionError(f"expected input (batch, {self.input_width}), got {x.shape}")
        for layer in self.layers:
            x = _ACTIVATION_VALUES[layer.activation](x @ layer.weight.values + layer.bias.values)
        return x

    def parameters(self):
        out = []
        for layer in self.layers:
            out.append(layer.weight)
            out.append(layer.bias)
        return out

    def detach(self):
        """Clear any tape attachment left on the parameters by training."""
        T.detach(*self.parameters())

    def export_tensors(self, prefix=""):
        """Named copies of every parameter array, for persistence."""
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"{prefix}layer{i}.weight"] = layer.weight.values.copy()
            out[f"{prefix}layer{i}.bias"] = layer.bias.values.copy()
        return out

    def import_tensors(self, mapping, prefix=""):
        """Overwrite parameters from ``export_tensors`` output; shapes must match."""
        for i, layer in enumerate(self.layers):
            for name, param in ((f"{prefix}layer{i}.weight", layer.weight),
                                (f"{prefix}layer{i}.bias", layer.bias)):
                if name not in mapping:
                    raise DimensionError(f"missing tensor {name}")
                incoming = np.asarray(mapping[name], dtype=np.float64)
                if incoming.shape != param.values.shape:
                    raise DimensionError(
                        f"tensor {name} has shape {incoming.shape}, expected {param.values.shape}"
                    )
                param.values = incoming.copy()

    def architecture(self):
        """Widths and activations, for checkpoint compatibility checks."""
        widths = [self.input_width] + [layer.weight.shape[1] for layer in self.layers]
        return {
            "widths": widths,
            "activations": [layer.activation for layer in self.layers],
        }


def watch_parameters(tape, *models):
    for model in models:
        for p in model.parameters():
            tape.watch(p)
