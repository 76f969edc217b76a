"""kNN label sanitization.

Each point is relabelled with the majority label of its k nearest
neighbours (itself excluded) when that majority's share reaches ``eta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataset import LabeledDataset
from .errors import ConfigError, DataError

Distance = Callable[[np.ndarray, np.ndarray], np.ndarray]


def squared_euclidean(X: np.ndarray, x: np.ndarray) -> np.ndarray:
    diff = X - x
    return np.einsum("ij,ij->i", diff, diff)


@dataclass(frozen=True)
class DefenceConfig:
    k: int = 10
    eta: float = 0.5
    max_passes: int = 1

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be an integer >= 1, got {self.k}")
        if not 0.5 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0.5, 1], got {self.eta}")
        if int(self.max_passes) != self.max_passes or self.max_passes < 1:
            raise ConfigError(f"max_passes must be an integer >= 1, got {self.max_passes}")


@dataclass(frozen=True)
class SanitizationReport:
    relabeled_indices_per_pass: list[list[int]]
    passes_run: int
    converged: bool
    # (pass, index, old_label, new_label) in pass then index order
    changes: list[tuple[int, int, int, int]] = field(default_factory=list, repr=False)

    @property
    def n_relabeled(self) -> int:
        return sum(len(p) for p in self.relabeled_indices_per_pass)


def _check_k(m: int, k: int) -> None:
    if not 1 <= k <= m - 1:
        raise DataError(f"k={k} needs 1 <= k <= m-1 with m={m}")


def _ranked_neighbours(X: np.ndarray, i: int, k: int, distance: Distance) -> np.ndarray:
    d = np.asarray(distance(X, X[i]), dtype=np.float64)
    d[i] = np.inf
    # stable sort keeps lower indices first among equal distances
    return np.argsort(d, kind="stable")[:k]


def knn_indices(data: LabeledDataset, i: int, k: int, distance: Distance = squared_euclidean) -> list[int]:
    _check_k(data.m, k)
    if not 0 <= i < data.m:
        raise DataError(f"index {i} out of range for {data.m} rows")
    return _ranked_neighbours(data.X, i, k, distance).tolist()


def _counts(labels) -> tuple[int, int]:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise DataError("empty neighbour label list")
    pos = int(np.sum(labels == 1))
    return pos, labels.size - pos


def confidence(labels) -> float:
    pos, neg = _counts(labels)
    return max(pos, neg) / (pos + neg)


def mode_label(labels) -> int:
    """Most common label; +1 on an exact tie."""
    pos, neg = _counts(labels)
    return 1 if pos >= neg else -1


def sanitize_pass(
    data: LabeledDataset,
    config: DefenceConfig,
    distance: Distance = squared_euclidean,
) -> tuple[LabeledDataset, list[int]]:
    """One synchronous relabelling pass.

    Decisions use the labels as they were at the start of the pass. An
    exact 50/50 neighbourhood never relabels.
    """
    _check_k(data.m, config.k)
    y = data.y
    y_new = y.copy()
    for i in range(data.m):
        nb = y[_ranked_neighbours(data.X, i, config.k, distance)]
        pos = int(np.sum(nb == 1))
        neg = config.k - pos
        if pos == neg:
            continue
        if max(pos, neg) / config.k >= config.eta:
            y_new[i] = 1 if pos > neg else -1
    changed = np.flatnonzero(y_new != y).tolist()
    return data.with_labels(y_new), changed


def sanitize(
    data: LabeledDataset,
    config: DefenceConfig,
    distance: Distance = squared_euclidean,
) -> tuple[LabeledDataset, SanitizationReport]:
    """Repeat :func:`sanitize_pass` until nothing changes or ``max_passes`` is hit."""
    current = data
    per_pass: list[list[int]] = []
    changes = []
    for n in range(1, config.max_passes + 1):
        nxt, changed = sanitize_pass(current, config, distance)
        per_pass.append(changed)
        changes.extend((n, i, int(current.y[i]), int(nxt.y[i])) for i in changed)
        current = nxt
        if not changed:
            break
    report = SanitizationReport(per_pass, len(per_pass), not per_pass[-1], changes)
    return current, report
