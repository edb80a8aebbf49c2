"""Label-to-code prototype network.

Maps a 0/1 class-indicator vector through a dense trunk to a semantic
representation, then through two heads: a tanh head producing a
continuous code column and a sigmoid head reconstructing the label.
The sign of the continuous code is the label's prototype code, used as
the attack target for that label.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimensionError, InputError
from .hashing import binarize
from .layers import MLP, DenseLayer


@dataclass
class PrototypeOutput:
    representation: T.Tensor
    continuous_code: T.Tensor
    predicted_label: T.Tensor


class PrototypeNet:
    """Trunk plus code/label heads; operates on (batch, classes) rows."""

    def __init__(self, trunk, code_head, label_head):
        if code_head.activation != "tanh":
            raise InputError("code head must use tanh to bound continuous codes")
        if label_head.activation != "sigmoid":
            raise InputError("label head must use sigmoid for per-class scores")
        width = trunk.output_width
        if code_head.weight.shape[0] != width or label_head.weight.shape[0] != width:
            raise DimensionError(
                f"heads must consume the trunk width {width}, got "
                f"{code_head.weight.shape} and {label_head.weight.shape}"
            )
        self.trunk = trunk
        self.code_head = code_head
        self.label_head = label_head

    @classmethod
    def create(cls, rng, classes, code_length, hidden_widths=(64, 32),
               representation_width=32):
        widths = [classes, *hidden_widths, representation_width]
        trunk = MLP.create(rng, widths, ["relu"] * (len(widths) - 1))
        code_head = DenseLayer.create(rng, representation_width, code_length, "tanh")
        label_head = DenseLayer.create(rng, representation_width, classes, "sigmoid")
        return cls(trunk, code_head, label_head)

    @property
    def classes(self):
        return self.trunk.input_width

    @property
    def code_length(self):
        return self.code_head.weight.shape[1]

    def _check_labels(self, labels):
        if labels.ndim != 2 or labels.shape[1] != self.classes:
            raise DimensionError(
                f"expected labels (batch, {self.classes}), got {labels.shape}"
            )
        if np.any(labels.sum(axis=1) == 0):
            raise InputError("a target label with no class is meaningless")

    def forward(self, labels):
        """Traced outputs for a (batch, classes) 0/1 label matrix."""
        labels = T._as_tensor(labels)
        self._check_labels(labels.values)
        rep = self.trunk.forward(labels)
        return PrototypeOutput(
            representation=rep,
            continuous_code=self.code_head.forward(rep),
            predicted_label=self.label_head.forward(rep),
        )

    def forward_values(self, labels):
        """Untraced (representation, continuous code, predicted label) arrays."""
        labels = np.asarray(labels, dtype=np.float64)
        self._check_labels(labels)
        rep = self.trunk.forward_values(labels)
        code = T.tanh_values(rep @ self.code_head.weight.values + self.code_head.bias.values)
        pred = T.sigmoid_values(rep @ self.label_head.weight.values + self.label_head.bias.values)
        return rep, code, pred

    def prototype_code(self, label):
        """Binary prototype code for one label vector."""
        label = np.asarray(label, dtype=np.float64).reshape(1, -1)
        _, code, _ = self.forward_values(label)
        return binarize(code[0])

    def parameters(self):
        return (self.trunk.parameters()
                + [self.code_head.weight, self.code_head.bias,
                   self.label_head.weight, self.label_head.bias])

    def detach(self):
        T.detach(*self.parameters())

    def export_tensors(self, prefix=""):
        out = self.trunk.export_tensors(prefix=f"{prefix}trunk.")
        out[f"{prefix}code_head.weight"] = self.code_head.weight.values.copy()
        out[f"{prefix}code_head.bias"] = self.code_head.bias.values.copy()
        out[f"{prefix}label_head.weight"] = self.label_head.weight.values.copy()
        out[f"{prefix}label_head.bias"] = self.label_head.bias.values.copy()
        return out

    def import_tensors(self, mapping, prefix=""):
        self.trunk.import_tensors(mapping, prefix=f"{prefix}trunk.")
        for name, param in ((f"{prefix}code_head.weight", self.code_head.weight),
                            (f"{prefix}code_head.bias", self.code_head.bias),
                            (f"{prefix}label_head.weight", self.label_head.weight),
                            (f"{prefix}label_head.bias", self.label_head.bias)):
            if name not in mapping:
                raise DimensionError(f"missing tensor {name}")
            incoming = np.asarray(mapping[name], dtype=np.float64)
            if incoming.shape != param.values.shape:
                raise DimensionError(
                    f"tensor {name} has shape {incoming.shape}, expected {param.values.shape}"
                )
            param.values = incoming.copy()

    def architecture(self):
        trunk = self.trunk.architecture()
        return {
            "trunk_widths": trunk["widths"],
            "code_length": self.code_length,
            "classes": self.classes,
        }


def loss_prototype(continuous_codes, code_matrix, similarity, predicted_labels,
                   true_labels, alpha1=1.0, alpha2=1e-4, alpha3=1.0):
    """Prototype training loss over column-major operands.

    ``continuous_codes`` is a traced (K, M) tensor of tanh outputs,
    ``code_matrix`` the constant (K, N) database codes, ``similarity``
    the (M, N) 0/1 relevance between prototype labels and items, and
    ``predicted_labels``/``true_labels`` are (C, M).  Three addends:

    - pair term: log(1 + exp(omega)) - s * omega over all (i, j) with
      omega = half the code inner product,
    - quantization: squared gap between the continuous codes and their
      sign, the sign held constant in the gradient,
    - classification: squared gap between predicted and true labels.
    """
    code_matrix = np.asarray(code_matrix, dtype=np.float64)
    similarity = np.asarray(similarity, dtype=np.float64)
    kk, m = continuous_codes.values.shape
    if code_matrix.ndim != 2 or code_matrix.shape[0] != kk:
        raise DimensionError(
            f"code matrix must be ({kk}, N), got {code_matrix.shape}"
        )
    if similarity.shape != (m, code_matrix.shape[1]):
        raise DimensionError(
            f"similarity must be ({m}, {code_matrix.shape[1]}), got {similarity.shape}"
        )
    true_labels = np.asarray(true_labels, dtype=np.float64)
    if predicted_labels.values.shape != true_labels.shape or true_labels.shape[1] != m:
        raise DimensionError(
            f"label blocks disagree: {predicted_labels.values.shape} vs "
            f"{true_labels.shape} for {m} prototypes"
        )

    omega = T.scale(T.matmul(T.transpose(continuous_codes), T.Tensor(code_matrix)), 0.5)
    pair = T.total(T.sub(T.softplus(omega), T.mul(T.Tensor(similarity), omega)))
    sign_target = T.Tensor(binarize(continuous_codes.values))
    quantization = T.total(T.square(T.sub(continuous_codes, sign_target)))
    classification = T.total(T.square(T.sub(predicted_labels, T.Tensor(true_labels))))
    return T.add(
        T.add(T.scale(pair, alpha1), T.scale(quantization, alpha2)),
        T.scale(classification, alpha3),
    )
