"""Linear hinge-loss classifier trained with plain stochastic gradient descent."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dataset import Example, LabeledDataset
from .errors import ConfigError, DataError


@dataclass(frozen=True, eq=False)
class Weights:
    w: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        if w.ndim != 1:
            raise DataError(f"weight vector must be 1-D, got shape {w.shape}")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise DataError("weights must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Weights):
            return NotImplemented
        return np.array_equal(self.w, other.w) and self.bias == other.bias

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise DataError(f"weights have dimension {self.dim}, features have {X.shape[-1]}")
        return X @ self.w + self.bias

    def to_text(self) -> str:
        return "".join(f"{v!r}\n" for v in (*self.w.tolist(), self.bias))

    @classmethod
    def from_text(cls, text: str) -> "Weights":
        vals = [float(line) for line in text.split()]
        if not vals:
            raise DataError("empty weights file")
        return cls(np.array(vals[:-1]), vals[-1])


def save_weights(weights: Weights, path: str | os.PathLike) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, weights.to_text())


def load_weights(path: str | os.PathLike) -> Weights:
    with open(path, encoding="utf-8") as fh:
        return Weights.from_text(fh.read())


@dataclass(frozen=True)
class TrainConfig:
    """SGD hyperparameters. Defaults are lr 0.01 and 100 epochs."""

    learning_rate: float = 0.01
    epochs: int = 100
    seed: int = 0
    shuffle: bool = True
    fit_bias: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigError(f"epochs must be an integer >= 1, got {self.epochs}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return TrainConfig(self.learning_rate, self.epochs, seed, self.shuffle, self.fit_bias)


def _check_dim(weights: Weights, x: np.ndarray) -> None:
    if x.shape != (weights.dim,):
        raise DataError(f"weights have dimension {weights.dim}, example has shape {x.shape}")


def margin(weights: Weights, example: Example) -> float:
    x = np.asarray(example.features, dtype=np.float64)
    _check_dim(weights, x)
    return example.label * (float(x @ weights.w) + weights.bias)


def hinge_loss(weights: Weights, example: Example) -> float:
    return max(0.0, 1.0 - margin(weights, example))


def hinge_subgradient(weights: Weights, example: Example) -> tuple[np.ndarray, float]:
    """Subgradient w.r.t. (w, bias); zero at and beyond the kink."""
    x = np.asarray(example.features, dtype=np.float64)
    if margin(weights, example) < 1.0:
        return -example.label * x, float(-example.label)
    return np.zeros_like(x), 0.0


def predict(weights: Weights, x: np.ndarray) -> int:
    x = np.asarray(x, dtype=np.float64)
    _check_dim(weights, x)
    return 1 if float(x @ weights.w) + weights.bias >= 0.0 else -1


def predict_all(weights: Weights, X: np.ndarray) -> np.ndarray:
    return np.where(weights.scores(X) >= 0.0, 1, -1)


def _nonempty(data: LabeledDataset) -> None:
    if data.m == 0:
        raise DataError("dataset is empty")


def avg_loss(weights: Weights, data: LabeledDataset) -> float:
    _nonempty(data)
    return float(np.mean(np.maximum(0.0, 1.0 - data.y * weights.scores(data.X))))


def zero_one_error(weights: Weights, data: LabeledDataset) -> float:
    _nonempty(data)
    return float(np.mean(predict_all(weights, data.X) != data.y))


# ---------------------------------------------------------------------------
# training


def visit_orders(m: int, config: TrainConfig) -> np.ndarray:
    """Index order for every epoch, shape (epochs, m).

    Epoch ``e`` is shuffled by a generator seeded with ``(seed, e)`` so any
    single epoch can be reproduced without replaying the others.
    """
    if not config.shuffle:
        return np.tile(np.arange(m, dtype=np.int64), (config.epochs, 1))
    return np.stack(
        [np.random.default_rng([config.seed, e]).permutation(m) for e in range(config.epochs)]
    ).astype(np.int64)


@njit(cache=True)
def _sgd_kernel(X, Y, orders, lr, fit_bias):
    n_models = Y.shape[0]
    d = X.shape[1]
    W = np.zeros((n_models, d))
    B = np.zeros(n_models)
    for c in range(n_models):
        for e in range(orders.shape[0]):
            for t in range(orders.shape[1]):
                i = orders[e, t]
                s = B[c]
                for j in range(d):
                    s += W[c, j] * X[i, j]
                yi = Y[c, i]
                if yi * s < 1.0:
                    for j in range(d):
                        W[c, j] += lr * yi * X[i, j]
                    if fit_bias:
                        B[c] += lr * yi
    return W, B


def train_many(X: np.ndarray, label_sets: np.ndarray, config: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Train one model per row of ``label_sets`` on the shared features ``X``.

    Every model sees the same visiting order, so results are identical to
    calling :func:`train_sgd` once per label vector.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(np.atleast_2d(label_sets), dtype=np.float64)
    if X.shape[0] == 0:
        raise DataError("cannot train on an empty dataset")
    if Y.shape[1] != X.shape[0]:
        raise DataError(f"label vectors have length {Y.shape[1]}, expected {X.shape[0]}")
    orders = visit_orders(X.shape[0], config)
    return _sgd_kernel(X, Y, orders, float(config.learning_rate), bool(config.fit_bias))


def train_sgd(data: LabeledDataset, config: TrainConfig) -> Weights:
    _nonempty(data)
    W, B = train_many(data.X, data.y[None, :], config)
    return Weights(W[0], B[0])


def batch_avg_loss(W: np.ndarray, B: np.ndarray, data: LabeledDataset) -> np.ndarray:
    """Mean hinge loss on ``data`` for each row of (W, B)."""
    # per-model matvec so each value is bit-identical to avg_loss()
    return np.array([avg_loss(Weights(w, b), data) for w, b in zip(W, B)])
