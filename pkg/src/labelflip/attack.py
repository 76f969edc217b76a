"""Label flipping attacks: greedy heuristic, exhaustive solver, random baseline."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .dataset import LabeledDataset
from .errors import ConfigError, DataError
from .linear_model import TrainConfig, Weights, avg_loss, batch_avg_loss, train_many, train_sgd

BRUTE_FORCE_CAP = 10_000


@dataclass(frozen=True, eq=False)
class FlipVector:
    """Indicator of flipped training labels."""

    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=bool, copy=True)
        if u.ndim != 1:
            raise DataError("flip vector must be 1-D")
        u.flags.writeable = False
        object.__setattr__(self, "u", u)

    @classmethod
    def from_indices(cls, m: int, indices) -> "FlipVector":
        u = np.zeros(m, dtype=bool)
        u[np.asarray(list(indices), dtype=np.int64)] = True
        return cls(u)

    @property
    def p(self) -> int:
        return int(self.u.sum())

    @property
    def indices(self) -> list[int]:
        return np.flatnonzero(self.u).tolist()

    def __len__(self) -> int:
        return self.u.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FlipVector):
            return NotImplemented
        return np.array_equal(self.u, other.u)


@dataclass(frozen=True)
class TraceStep:
    step: int
    index: int
    validation_loss: float
    # candidate index -> e-value for this round; greedy only
    scores: dict[int, float] | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class AttackResult:
    poisoned: LabeledDataset
    flips: FlipVector
    trace: list[TraceStep]
    # validation hinge loss of the model trained on ``poisoned``; None without a validation set
    validation_loss: float | None = None

    @property
    def order(self) -> list[int]:
        """Flipped indices in commit order (sorted when the attack has no order)."""
        return [s.index for s in self.trace] if self.trace else self.flips.indices


def budget_from_fraction(fraction: float, m: int) -> int:
    """round(fraction * m), halves rounded up."""
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError(f"poison fraction must lie in [0, 1], got {fraction}")
    return int((Decimal(repr(fraction)) * m).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def apply_flips(data: LabeledDataset, flips: FlipVector) -> LabeledDataset:
    if len(flips) != data.m:
        raise DataError(f"flip vector has length {len(flips)}, dataset has {data.m} rows")
    return data.with_labels(np.where(flips.u, -data.y, data.y))


def _check_budget(p: int, m: int) -> None:
    if p < 0 or p > m:
        raise ConfigError(f"budget p={p} must lie in [0, {m}]")


def lfa_greedy(
    train: LabeledDataset,
    validation: LabeledDataset,
    p: int,
    config: TrainConfig,
) -> AttackResult:
    """Greedy label flipping attack.

    Each round tries every remaining index on top of the flips committed so
    far, retrains from scratch with ``config`` and keeps the flip that
    maximizes the mean validation hinge loss. Ties go to the lowest index.
    """
    m = train.m
    _check_budget(p, m)
    if validation.m == 0:
        raise DataError("validation set is empty")

    y_cur = train.y.copy()
    remaining = list(range(m))
    trace: list[TraceStep] = []
    for k in range(1, p + 1):
        cand = np.array(remaining, dtype=np.int64)
        Y = np.tile(y_cur, (cand.size, 1))
        Y[np.arange(cand.size), cand] *= -1
        W, B = train_many(train.X, Y, config)
        e = batch_avg_loss(W, B, validation)
        best = int(np.argmax(e))  # first maximum -> lowest index, cand is sorted
        i_k = int(cand[best])
        trace.append(TraceStep(k, i_k, float(e[best]), dict(zip(cand.tolist(), e.tolist()))))
        y_cur[i_k] *= -1
        remaining.remove(i_k)

    flips = FlipVector.from_indices(m, [s.index for s in trace])
    poisoned = apply_flips(train, flips)
    if trace:
        final = trace[-1].validation_loss
    else:
        final = avg_loss(train_sgd(poisoned, config), validation)
    return AttackResult(poisoned, flips, trace, final)


def brute_force_attack(
    train: LabeledDataset,
    validation: LabeledDataset,
    p: int,
    config: TrainConfig,
    cap: int = BRUTE_FORCE_CAP,
    batch_size: int = 512,
) -> AttackResult:
    """Exact maximizer of validation hinge loss over all p-subsets of flips.

    Only feasible for tiny instances; refuses when C(m, p) exceeds ``cap``.
    Ties resolve to the lexicographically smallest index set.
    """
    m = train.m
    _check_budget(p, m)
    if validation.m == 0:
        raise DataError("validation set is empty")
    n_subsets = math.comb(m, p)
    if n_subsets > cap:
        raise ConfigError(f"C({m}, {p}) = {n_subsets} subsets exceeds the cap of {cap}")

    best_loss, best_set = -np.inf, ()
    combos = itertools.combinations(range(m), p)
    while True:
        chunk = list(itertools.islice(combos, batch_size))
        if not chunk:
            break
        Y = np.tile(train.y, (len(chunk), 1))
        for r, subset in enumerate(chunk):
            Y[r, list(subset)] *= -1
        W, B = train_many(train.X, Y, config)
        e = batch_avg_loss(W, B, validation)
        j = int(np.argmax(e))
        if e[j] > best_loss:
            best_loss, best_set = float(e[j]), chunk[j]

    # trace: loss after flipping each prefix of the chosen (sorted) set
    trace = []
    for k in range(1, p + 1):
        prefix = FlipVector.from_indices(m, best_set[:k])
        loss = best_loss if k == p else avg_loss(train_sgd(apply_flips(train, prefix), config), validation)
        trace.append(TraceStep(k, int(best_set[k - 1]), loss))
    flips = FlipVector.from_indices(m, best_set)
    return AttackResult(apply_flips(train, flips), flips, trace, best_loss)


def random_flip(train: LabeledDataset, p: int, seed: int) -> AttackResult:
    _check_budget(p, train.m)
    chosen = np.random.default_rng(seed).choice(train.m, size=p, replace=False)
    flips = FlipVector.from_indices(train.m, chosen)
    return AttackResult(apply_flips(train, flips), flips, [])


def result_from_prefix(train: LabeledDataset, result: AttackResult, p: int) -> AttackResult:
    """The greedy result for a smaller budget ``p``.

    Greedy rounds do not depend on the total budget, so the first ``p``
    committed flips are exactly what ``lfa_greedy(..., p, ...)`` returns.
    """
    if p > len(result.trace):
        raise ConfigError(f"prefix {p} longer than trace of {len(result.trace)} steps")
    trace = result.trace[:p]
    flips = FlipVector.from_indices(train.m, [s.index for s in trace])
    loss = trace[-1].validation_loss if trace else None
    return AttackResult(apply_flips(train, flips), flips, trace, loss)
