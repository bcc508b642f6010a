"""Self-supervised time predictor: a small L1+L2-regularized MLP.

The model maps each observation x_t to a scalar estimate of its normalized
time index (t+1)/T.  On structure-free data the regularized fit collapses to
the average target (about 0.5); a change point lets the network separate the
segments, which shows up as a mean shift in the predicted sequence y_t that
univariate change point detection can pick up.

Training is plain mini-batch SGD with momentum on squared error plus
l1 * sum|W| + l2 * sum W^2 over weights (biases are unpenalized), fully
determined by the config seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cpd_core import as_matrix
from .errors import ConfigError, FormatError, ShapeMismatchError, TrainingDivergedError

DEFAULT_HIDDEN = (64, 32)

STD_FLOOR = 1e-12

MODEL_MAGIC = b"TPM1"


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for :func:`fit`; every field is deterministic given seed."""

    l1_weight: float = 1e-4
    l2_weight: float = 1e-3
    learning_rate: float = 1e-2
    epochs: int = 30
    batch_size: int = 256
    seed: int = 0
    momentum: float = 0.9

    def __post_init__(self):
        if self.l1_weight < 0 or self.l2_weight < 0:
            raise ConfigError("penalty weights must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if int(self.epochs) < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")


@dataclass
class TimePredictor:
    """Trained predictor: rectifier MLP plus the input standardizer it was fit with.

    ``layer_sizes`` is ``(d, h_1, ..., 1)``; ``weights[l]`` has shape
    (layer_sizes[l], layer_sizes[l+1]).  Hidden activations are rectified,
    the output is linear.  ``loss_curve`` holds the mean training loss per
    epoch (not persisted by save/load).
    """

    layer_sizes: tuple
    weights: list
    biases: list
    input_mean: np.ndarray
    input_std: np.ndarray
    loss_curve: tuple = field(default_factory=tuple)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_weight_layers(self) -> int:
        return len(self.weights)

    def standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.input_mean) / self.input_std


def normalized_targets(T: int) -> np.ndarray:
    """Regression targets (t+1)/T for t = 0..T-1, i.e. 1-based indices over T."""
    T = int(T)
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    return (np.arange(T, dtype=np.float64) + 1.0) / T


def _init_params(layer_sizes: Sequence[int], rng: np.random.Generator):
    weights = []
    biases = []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return weights, biases


def forward(weights, biases, X: np.ndarray):
    """Forward pass; returns (pre-activations, activations) per layer.

    ``activations[0]`` is the input; hidden layers are rectified, the last
    layer is linear.
    """
    zs = []
    acts = [X]
    a = X
    last = len(weights) - 1
    for l, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W + b
        zs.append(z)
        a = np.maximum(z, 0.0) if l < last else z
        acts.append(a)
    return zs, acts


def loss_and_gradients(weights, biases, X: np.ndarray, targets: np.ndarray,
                       l1_weight: float, l2_weight: float):
    """Full training loss on a batch and its gradients for every parameter.

    Loss = mean squared error + l1 * sum|W| + l2 * sum W^2 (weights only).
    Returns (loss, weight_grads, bias_grads).
    """
    B = X.shape[0]
    zs, acts = forward(weights, biases, X)
    pred = acts[-1][:, 0]
    err = pred - targets
    loss = float(np.mean(err * err))
    for W in weights:
        loss += l1_weight * float(np.sum(np.abs(W)))
        loss += l2_weight * float(np.sum(W * W))

    dWs = [None] * len(weights)
    dbs = [None] * len(weights)
    delta = (2.0 / B) * err[:, None]
    for l in range(len(weights) - 1, -1, -1):
        dWs[l] = acts[l].T @ delta + l1_weight * np.sign(weights[l]) + 2.0 * l2_weight * weights[l]
        dbs[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ weights[l].T) * (zs[l - 1] > 0.0)
    return loss, dWs, dbs


def fit(series, config: TrainConfig = TrainConfig(),
        hidden_sizes: Sequence[int] = DEFAULT_HIDDEN) -> TimePredictor:
    """Train a time predictor on the series by mini-batch SGD with momentum.

    Input rows are standardized per dimension (std floored at 1e-12) before
    entering the network.  Shuffling and initialization are fully determined
    by ``config.seed``; identical inputs and seed give identical parameters.
    Raises :class:`TrainingDivergedError` if the loss becomes non-finite.
    """
    X = as_matrix(series)
    T, d = X.shape
    if config.batch_size > T:
        raise ConfigError(f"batch_size={config.batch_size} exceeds series length T={T}")
    hidden = tuple(int(h) for h in hidden_sizes)
    if any(h < 1 for h in hidden):
        raise ConfigError(f"hidden layer widths must be >= 1, got {hidden}")
    layer_sizes = (d,) + hidden + (1,)

    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), STD_FLOOR)
    Xs = (X - mean) / std
    targets = normalized_targets(T)

    rng = np.random.default_rng(config.seed)
    weights, biases = _init_params(layer_sizes, rng)
    vel_w = [np.zeros_like(W) for W in weights]
    vel_b = [np.zeros_like(b) for b in biases]

    lr = config.learning_rate
    mom = config.momentum
    curve = []
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(T)
        batch_losses = []
        for start in range(0, T, config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, dWs, dbs = loss_and_gradients(
                weights, biases, Xs[idx], targets[idx], config.l1_weight, config.l2_weight
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"training loss became non-finite at epoch {epoch}")
            for l in range(len(weights)):
                vel_w[l] = mom * vel_w[l] - lr * dWs[l]
                vel_b[l] = mom * vel_b[l] - lr * dbs[l]
                weights[l] = weights[l] + vel_w[l]
                biases[l] = biases[l] + vel_b[l]
            batch_losses.append(loss)
        curve.append(float(np.mean(batch_losses)))

    return TimePredictor(layer_sizes, weights, biases, mean, std, tuple(curve))


def linear_head_fit(series, config: TrainConfig = TrainConfig()) -> TimePredictor:
    """Fit a direct linear map d -> 1 (no hidden layers) with both penalties.

    The elastic-net style head used when rows are precomputed features from a
    frozen extractor; contracts are identical to :func:`fit`.
    """
    return fit(series, config, hidden_sizes=())


def predict(model: TimePredictor, series) -> np.ndarray:
    """Apply the standardizer and network row-wise; returns the length-T y_t."""
    X = as_matrix(series)
    if X.shape[1] != model.input_dim:
        raise ShapeMismatchError(
            f"series has {X.shape[1]} dimensions, model expects {model.input_dim}"
        )
    _, acts = forward(model.weights, model.biases, model.standardize(X))
    return acts[-1][:, 0].copy()


def save_model(model: TimePredictor, path) -> None:
    """Serialize to a single self-describing file (see :func:`load_model`).

    Layout: magic "TPM1"; uint32 count of layer sizes; the layer sizes as
    uint32; then standardizer mean and std followed by each layer's weights
    (row-major) and biases, all little-endian float64.  Round-trips bitwise.
    """
    sizes = np.asarray(model.layer_sizes, dtype="<u4")
    parts = [MODEL_MAGIC, struct.pack("<I", len(sizes)), sizes.tobytes()]
    parts.append(np.ascontiguousarray(model.input_mean, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(model.input_std, dtype="<f8").tobytes())
    for W, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_model(path) -> TimePredictor:
    """Inverse of :func:`save_model`; raises :class:`FormatError` on bad files."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model file (bad magic)")
    (n_sizes,) = struct.unpack("<I", blob[4:8])
    off = 8
    if n_sizes < 2 or len(blob) < off + 4 * n_sizes:
        raise FormatError(f"{path}: truncated model header")
    sizes = np.frombuffer(blob, dtype="<u4", count=n_sizes, offset=off)
    layer_sizes = tuple(int(s) for s in sizes)
    if any(s < 1 for s in layer_sizes) or layer_sizes[-1] != 1:
        raise FormatError(f"{path}: invalid layer sizes {layer_sizes}")
    off += 4 * n_sizes
    d = layer_sizes[0]
    n_params = 2 * d + sum(
        n_in * n_out + n_out for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:])
    )
    if len(blob) != off + 8 * n_params:
        raise FormatError(
            f"{path}: expected {off + 8 * n_params} bytes for layer sizes {layer_sizes}, "
            f"got {len(blob)}"
        )

    def take(count):
        nonlocal off
        out = np.frombuffer(blob, dtype="<f8", count=count, offset=off).copy()
        off += 8 * count
        return out

    mean = take(d)
    std = take(d)
    weights = []
    biases = []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(take(n_in * n_out).reshape(n_in, n_out))
        biases.append(take(n_out))
    return TimePredictor(layer_sizes, weights, biases, mean, std)
