"""The attacked deep hashing model and Hamming-space primitives.

The model is a dense stack ending in tanh, so its continuous output
lives in (-1,1)^K; retrieval codes are its elementwise sign.  Training
minimizes the pairwise similarity log-likelihood over continuous codes
plus a quantization penalty pulling them toward +/-1.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .data import build_similarity_matrix
from .errors import DimensionError, InputError, TrainingDivergedError
from .layers import MLP, watch_parameters
from .optim import Adam


def binarize(values):
    """Elementwise sign with the fixed tie rule sign(0) = +1."""
    values = np.asarray(values, dtype=np.float64)
    return np.where(values >= 0.0, 1.0, -1.0)


def hamming_distance(a, b):
    """Disagreement count between two +/-1 codes, via the inner-product identity."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise DimensionError(f"codes must be equal-length vectors, got {a.shape} and {b.shape}")
    return 0.5 * (a.shape[0] - float(a @ b))


def hamming_distances(query, code_matrix):
    """Distances from one code to every column of a (K, N) code matrix."""
    query = np.asarray(query, dtype=np.float64)
    code_matrix = np.asarray(code_matrix, dtype=np.float64)
    if query.ndim != 1 or code_matrix.ndim != 2 or query.shape[0] != code_matrix.shape[0]:
        raise DimensionError(
            f"need a length-K code and a (K, N) matrix, got {query.shape} and {code_matrix.shape}"
        )
    return 0.5 * (query.shape[0] - query @ code_matrix)


@dataclass(frozen=True)
class HashTrainConfig:
    code_length: int = 12
    hidden_widths: tuple = (128, 64)
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    quantization_weight: float = 0.1

    def validate(self):
        if self.code_length <= 0:
            raise InputError(f"code length must be positive, got {self.code_length}")
        if self.epochs < 1:
            raise InputError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size < 2:
            raise InputError(
                f"pairwise training needs batches of at least 2, got {self.batch_size}"
            )
        if self.learning_rate <= 0.0:
            raise InputError(f"learning rate must be positive, got {self.learning_rate}")
        if self.quantization_weight < 0.0:
            raise InputError(
                f"quantization weight must be non-negative, got {self.quantization_weight}"
            )


class HashModel:
    """Continuous hash network f plus sign binarization F = sign(f)."""

    def __init__(self, net):
        if net.layers[-1].activation != "tanh":
            raise InputError("hash network must end in tanh to bound continuous codes")
        self.net = net

    @classmethod
    def create(cls, rng, input_width, code_length, hidden_widths=(128, 64)):
        widths = [input_width, *hidden_widths, code_length]
        activations = ["tanh"] * (len(widths) - 1)
        return cls(MLP.create(rng, widths, activations))

    @property
    def code_length(self):
        return self.net.output_width

    @property
    def input_width(self):
        return self.net.input_width

    def forward(self, x):
        """Traced continuous codes (batch, K); use inside training/attack tapes."""
        return self.net.forward(x)

    def continuous_codes(self, images):
        """Untraced continuous codes (batch, K)."""
        return self.net.forward_values(images)

    def codes(self, images):
        """Binary codes (batch, K) over {-1,+1}."""
        return binarize(self.continuous_codes(images))


def pairwise_code_loss(continuous, similarity, quantization_weight):
    """Batch objective: masked pair log-likelihood plus quantization pull.

    ``continuous`` is a traced (n, K) tensor, ``similarity`` the 0/1
    matrix over the same n samples.  Each unordered pair i<j contributes
    log(1+exp(omega)) - s_ij*omega with omega = half the code inner
    product; the diagonal is excluded.  The quantization term treats
    sign(continuous) as a constant target.
    """
    n = continuous.values.shape[0]
    similarity = np.asarray(similarity, dtype=np.float64)
    if similarity.shape != (n, n):
        raise DimensionError(
            f"similarity must be ({n}, {n}) for this batch, got {similarity.shape}"
        )
    omega = T.scale(T.matmul(continuous, T.transpose(continuous)), 0.5)
    addends = T.sub(T.softplus(omega), T.mul(T.Tensor(similarity), omega))
    upper = np.triu(np.ones((n, n)), k=1)
    pair_count = max(n * (n - 1) // 2, 1)
    pair_loss = T.scale(T.total(T.mul(addends, T.Tensor(upper))), 1.0 / pair_count)
    target = T.Tensor(binarize(continuous.values))
    quant_loss = T.scale(T.total(T.square(T.sub(continuous, target))), 1.0 / n)
    return T.add(pair_loss, T.scale(quant_loss, quantization_weight))


def train_target_model(images, labels, config, rng):
    """Fit the retrieval model; returns (model, per-epoch mean losses)."""
    config.validate()
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if images.ndim != 2 or images.shape[0] == 0:
        raise InputError("training set must be a non-empty (N, pixels) array")
    if labels.shape[0] != images.shape[0]:
        raise DimensionError(
            f"got {images.shape[0]} images but {labels.shape[0]} label rows"
        )
    if np.any(labels.sum(axis=1) == 0):
        raise InputError("every training sample needs at least one class")

    rng = np.random.default_rng(rng)
    model = HashModel.create(rng, images.shape[1], config.code_length, config.hidden_widths)
    optimizer = Adam(model.net.parameters(), learning_rate=config.learning_rate)
    history = []
    count = images.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(count)
        epoch_losses = []
        for start in range(0, count, config.batch_size):
            batch = order[start:start + config.batch_size]
            if batch.shape[0] < 2:
                continue
            tape = T.Tape()
            watch_parameters(tape, model.net)
            continuous = model.forward(T.Tensor(images[batch]))
            similarity = build_similarity_matrix(labels[batch], labels[batch])
            loss = pairwise_code_loss(continuous, similarity, config.quantization_weight)
            value = float(loss.values)
            if not np.isfinite(value):
                raise TrainingDivergedError(epoch)
            epoch_losses.append(value)
            optimizer.step(T.backward(tape, loss))
        history.append(float(np.mean(epoch_losses)))
    model.net.detach()
    return model, history


def encode_database(model, images):
    """(K, N) code matrix whose column j encodes database item j."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 2 or images.shape[0] == 0:
        raise InputError("database must be a non-empty (N, pixels) array")
    return model.codes(images).T
