"""Attack/defence evaluation protocol over repeated random splits.

For every split the training set is standardized, a clean model is
trained, the greedy attack is run once up to the largest budget (smaller
budgets are prefixes of the same run), and each poisoned set is evaluated
with and without the kNN defence. Defended runs pick ``k`` on the trusted
validation set.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .attack import budget_from_fraction, lfa_greedy, result_from_prefix
from .dataset import LabeledDataset, apply_standardizer, fit_standardizer, random_split, subsample
from .defence import DefenceConfig, sanitize
from .errors import ConfigError, DataError, InvariantError
from .linear_model import TrainConfig, train_sgd, zero_one_error

log = logging.getLogger(__name__)

CONDITIONS = ("clean", "undefended", "defended")
RESULT_COLUMNS = (
    "dataset", "fraction", "split_id", "condition", "k_selected", "eta", "test_error", "validation_error",
)
SUMMARY_COLUMNS = ("dataset", "fraction", "condition", "mean_error", "std_error", "n_splits")
DEFAULT_FRACTIONS = (0.0, 0.05, 0.10, 0.15, 0.20)
DEFAULT_K_GRID = (1, 3, 5, 10, 15, 20)

# undefended/clean error ratio at 20% poisoning reported for the original runs
REFERENCE_DEGRADATION = {"breastcancer": 2.8, "mnist17": 6.0, "spambase": 4.5}
DATASET_NOTES = {
    "spambase": "full UCI file used (4,601 rows / 57 features, 4,597 in the KEEL copy); "
    "no row or feature subset is applied",
}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    poison_fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    repetitions: int = 10
    n_train: int = 100
    n_val: int = 100
    train_config: TrainConfig = field(default_factory=TrainConfig)
    eta: float = 0.5
    k_grid: tuple[int, ...] = DEFAULT_K_GRID
    master_seed: int = 0
    max_passes: int = 1
    subsample: int | None = None

    def __post_init__(self):
        fr = tuple(float(f) for f in self.poison_fractions)
        object.__setattr__(self, "poison_fractions", fr)
        object.__setattr__(self, "k_grid", tuple(int(k) for k in self.k_grid))
        if not fr:
            raise ConfigError("at least one poison fraction is required")
        if list(fr) != sorted(fr) or len(set(fr)) != len(fr):
            raise ConfigError(f"poison fractions must be strictly ascending, got {fr}")
        if any(not 0.0 <= f < 1.0 for f in fr):
            raise ConfigError(f"poison fractions must lie in [0, 1), got {fr}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.n_train < 2 or self.n_val < 1:
            raise ConfigError("n_train must be >= 2 and n_val >= 1")
        if not self.k_grid or min(self.k_grid) < 1:
            raise ConfigError(f"k_grid must be nonempty with k >= 1, got {self.k_grid}")
        if max(self.k_grid) > self.n_train - 1:
            raise ConfigError(f"k_grid value {max(self.k_grid)} too large for n_train={self.n_train}")
        DefenceConfig(k=1, eta=self.eta, max_passes=self.max_passes)
        if self.subsample is not None and self.subsample < self.n_train + self.n_val + 1:
            raise ConfigError("subsample must leave room for train, validation and test rows")


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    fraction: float
    split_id: int
    condition: str
    k_selected: int | None
    eta: float | None
    test_error: float
    validation_error: float

    def key(self):
        return (self.dataset, self.fraction, self.split_id, self.condition)


def _condition_rank(c: str) -> int:
    return CONDITIONS.index(c) if c in CONDITIONS else len(CONDITIONS)


def _row_order(r: ResultRow):
    return (
        r.dataset, r.split_id, r.fraction, _condition_rank(r.condition),
        -1 if r.k_selected is None else r.k_selected, -1.0 if r.eta is None else r.eta,
    )


def _fmt(x) -> str:
    return "" if x is None else repr(x)


@dataclass(frozen=True)
class ResultsTable:
    rows: tuple[ResultRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(sorted(self.rows, key=_row_order)))
        full_keys = set()
        for r in self.rows:
            if r.condition not in CONDITIONS:
                raise InvariantError(f"unknown condition {r.condition!r}")
            if not (0.0 <= r.test_error <= 1.0 and 0.0 <= r.validation_error <= 1.0):
                raise InvariantError(f"error outside [0, 1] in {r}")
            fk = r.key() + (r.k_selected, r.eta)
            if fk in full_keys:
                raise InvariantError(f"duplicate results row {fk}")
            full_keys.add(fk)

    @property
    def is_sweep_over_settings(self) -> bool:
        """True when some (dataset, fraction, split, condition) key repeats with different defence settings."""
        return len({r.key() for r in self.rows}) != len(self.rows)

    def select(self, **match) -> list[ResultRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in self.rows:
            w.writerow([r.dataset, repr(r.fraction), r.split_id, r.condition, _fmt(r.k_selected),
                        _fmt(r.eta), repr(r.test_error), repr(r.validation_error)])
        return buf.getvalue()

    @classmethod
    def from_csv_text(cls, text: str) -> "ResultsTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(header) != RESULT_COLUMNS:
            raise DataError(f"results header must be {','.join(RESULT_COLUMNS)}, got {header}")
        rows = []
        for n, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(RESULT_COLUMNS):
                raise DataError(f"results row {n}: expected {len(RESULT_COLUMNS)} fields, got {len(rec)}")
            try:
                rows.append(ResultRow(
                    rec[0], float(rec[1]), int(rec[2]), rec[3],
                    int(rec[4]) if rec[4] else None, float(rec[5]) if rec[5] else None,
                    float(rec[6]), float(rec[7]),
                ))
            except ValueError as exc:
                raise DataError(f"results row {n}: {exc}") from None
        try:
            return cls(tuple(rows))
        except InvariantError as exc:
            raise DataError(str(exc)) from None


@dataclass(frozen=True)
class SummaryRow:
    dataset: str
    fraction: float
    condition: str
    mean_error: float
    std_error: float
    n_splits: int


def aggregate(table: ResultsTable) -> list[SummaryRow]:
    """Mean and population std of test error over splits.

    Rows are grouped by (dataset, fraction, condition). For tables that sweep
    defence settings, defended rows are additionally split by their setting
    and the condition reads e.g. ``defended[k=10,eta=0.5]``.
    """
    if not table.rows:
        raise DataError("cannot aggregate an empty results table")
    by_setting = table.is_sweep_over_settings
    groups: dict[tuple, list[float]] = {}
    for r in table.rows:
        cond = r.condition
        if by_setting and cond == "defended":
            cond = f"defended[k={r.k_selected},eta={r.eta!r}]"
        groups.setdefault((r.dataset, r.fraction, cond, r.k_selected if by_setting else None,
                           r.eta if by_setting else None), []).append(r.test_error)

    def order(key):
        ds, fr, cond, k, eta = key
        return (ds, fr, _condition_rank(cond.split("[")[0]), -1 if k is None else k,
                -1.0 if eta is None else eta, cond)

    out = []
    for key in sorted(groups, key=order):
        vals = np.array(groups[key])
        out.append(SummaryRow(key[0], key[1], key[2], float(vals.mean()), float(vals.std()), len(vals)))
    return out


def summary_to_csv_text(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([r.dataset, repr(r.fraction), r.condition, repr(r.mean_error), repr(r.std_error), r.n_splits])
    return buf.getvalue()


def mean_error(table: ResultsTable, condition: str, fraction: float, **match) -> float:
    vals = [r.test_error for r in table.select(condition=condition, fraction=fraction, **match)]
    if not vals:
        raise DataError(f"no {condition} rows at fraction {fraction}")
    return float(np.mean(vals))


def degradation_ratio(table: ResultsTable, fraction: float = 0.2) -> float:
    clean = mean_error(table, "clean", 0.0)
    return mean_error(table, "undefended", fraction) / clean if clean > 0 else math.inf


# ---------------------------------------------------------------------------
# protocol


def select_k(
    poisoned_train: LabeledDataset,
    trusted_validation: LabeledDataset,
    k_grid: Sequence[int],
    eta: float,
    train_config: TrainConfig,
    max_passes: int = 1,
) -> int:
    """k with the lowest validation 0/1 error after sanitizing; ties to the smallest k."""
    grid = sorted(set(int(k) for k in k_grid))
    if not grid:
        raise ConfigError("k grid is empty")
    if trusted_validation.m == 0:
        raise DataError("validation set is empty")
    if grid[0] < 1 or grid[-1] > poisoned_train.m - 1:
        raise ConfigError(f"k grid {grid} out of range for {poisoned_train.m} training points")
    if len(grid) == 1:
        return grid[0]
    best_k, best_err = grid[0], math.inf
    for k in grid:
        cleaned, _ = sanitize(poisoned_train, DefenceConfig(k, eta, max_passes))
        err = zero_one_error(train_sgd(cleaned, train_config), trusted_validation)
        if err < best_err:
            best_k, best_err = k, err
    return best_k


@dataclass(frozen=True)
class _SplitData:
    train: LabeledDataset
    val: LabeledDataset
    test: LabeledDataset
    train_config: TrainConfig


def _prepare_split(config: ExperimentConfig, data: LabeledDataset, split_id: int) -> _SplitData:
    seed = config.master_seed + split_id
    split = random_split(data, config.n_train, config.n_val, seed)
    std = fit_standardizer(split.train)
    return _SplitData(
        apply_standardizer(std, split.train),
        apply_standardizer(std, split.validation),
        apply_standardizer(std, split.test),
        config.train_config.with_seed(seed),
    )


def _evaluate(name, fraction, split_id, condition, k, eta, train, s: _SplitData) -> ResultRow:
    w = train_sgd(train, s.train_config)
    return ResultRow(name, fraction, split_id, condition, k, eta,
                     zero_one_error(w, s.test), zero_one_error(w, s.val))


def _poisoned_sets(config: ExperimentConfig, s: _SplitData):
    budgets = [budget_from_fraction(f, s.train.m) for f in config.poison_fractions]
    # the validation set is the attacker's objective only; it is never flipped
    full = lfa_greedy(s.train, s.val, max(budgets), s.train_config)
    for f, p in zip(config.poison_fractions, budgets):
        yield f, result_from_prefix(s.train, full, p).poisoned


def _run_split(config: ExperimentConfig, data: LabeledDataset, split_id: int) -> list[ResultRow]:
    name = config.dataset
    s = _prepare_split(config, data, split_id)
    rows = [_evaluate(name, 0.0, split_id, "clean", None, None, s.train, s)]
    for f, poisoned in _poisoned_sets(config, s):
        rows.append(_evaluate(name, f, split_id, "undefended", None, None, poisoned, s))
        k = select_k(poisoned, s.val, config.k_grid, config.eta, s.train_config, config.max_passes)
        cleaned, _ = sanitize(poisoned, DefenceConfig(k, config.eta, config.max_passes))
        rows.append(_evaluate(name, f, split_id, "defended", k, config.eta, cleaned, s))
    log.info("%s split %d done", name, split_id)
    return rows


def _run_split_sensitivity(config, data, split_id, vary, values) -> list[ResultRow]:
    name = config.dataset
    s = _prepare_split(config, data, split_id)
    rows = [_evaluate(name, 0.0, split_id, "clean", None, None, s.train, s)]
    for f, poisoned in _poisoned_sets(config, s):
        rows.append(_evaluate(name, f, split_id, "undefended", None, None, poisoned, s))
        for v in values:
            k, eta = (int(v), 0.5) if vary == "k" else (10, float(v))
            cleaned, _ = sanitize(poisoned, DefenceConfig(k, eta, config.max_passes))
            rows.append(_evaluate(name, f, split_id, "defended", k, eta, cleaned, s))
    log.info("%s split %d done", name, split_id)
    return rows


def _map_splits(fn, config: ExperimentConfig, data: LabeledDataset, jobs: int, *extra) -> list[ResultRow]:
    ids = list(range(1, config.repetitions + 1))
    if jobs <= 1 or len(ids) == 1:
        chunks = [fn(config, data, i, *extra) for i in ids]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(fn, config, data, i, *extra) for i in ids]
            chunks = [f.result() for f in futures]
    return [r for chunk in chunks for r in chunk]


def _prepared(config: ExperimentConfig, data: LabeledDataset) -> LabeledDataset:
    if config.subsample is not None:
        data = subsample(data, config.subsample, config.master_seed)
    if config.n_train + config.n_val >= data.m:
        raise DataError(f"{config.dataset}: {data.m} rows cannot hold {config.n_train}+{config.n_val} plus a test set")
    return data


def run_poison_sweep(config: ExperimentConfig, data: LabeledDataset, jobs: int = 1) -> ResultsTable:
    """Clean / undefended / defended test errors for every split and poison fraction."""
    data = _prepared(config, data)
    return ResultsTable(tuple(_map_splits(_run_split, config, data, jobs)))


def sensitivity_sweep(
    config: ExperimentConfig,
    data: LabeledDataset,
    vary: str,
    values: Iterable[float],
    jobs: int = 1,
) -> ResultsTable:
    """Defended error for fixed defence settings.

    Varying ``k`` holds eta at 0.5; varying ``eta`` holds k at 10. Clean
    and undefended rows are included as the baseline.
    """
    if vary not in ("k", "eta"):
        raise ConfigError(f"vary must be 'k' or 'eta', got {vary!r}")
    values = tuple(values)
    if not values:
        raise ConfigError("no values to sweep")
    for v in values:
        k, eta = (int(v), 0.5) if vary == "k" else (10, float(v))
        DefenceConfig(k, eta, config.max_passes)
        if k > config.n_train - 1:
            raise ConfigError(f"k={k} too large for n_train={config.n_train}")
    data = _prepared(config, data)
    return ResultsTable(tuple(_map_splits(_run_split_sensitivity, config, data, jobs, vary, values)))
