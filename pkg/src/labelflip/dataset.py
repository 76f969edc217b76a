"""Labeled datasets, CSV/IDX ingestion, standardization and random splits.

Labels are always stored as -1/+1. Feature matrices are float64 and are
made read-only on construction so a dataset can be shared freely.
"""

from __future__ import annotations

import csv
import gzip
import io
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class Example:
    features: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Ordered feature vectors with binary labels in {-1, +1}.

    ``X`` has shape (m, d), ``y`` has shape (m,). Indices are stable: every
    operation that returns a dataset keeps row ``i`` at position ``i``.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        y = np.array(self.y, copy=True)
        if X.ndim != 2:
            raise DataError(f"features must be a 2-D array, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(f"expected {X.shape[0]} labels, got shape {y.shape}")
        if y.size and not np.all((y == 1) | (y == -1)):
            raise DataError("labels must be exactly -1 or +1")
        if not np.all(np.isfinite(X)):
            raise DataError("features must be finite")
        y = y.astype(np.int64)
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, i: int) -> Example:
        return Example(self.X[i], int(self.y[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.X[idx], self.y[idx])

    def with_labels(self, y: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.X, y)

    def class_counts(self) -> tuple[int, int]:
        """(number of +1 labels, number of -1 labels)."""
        pos = int(np.sum(self.y == 1))
        return pos, self.m - pos


@dataclass(frozen=True)
class DataSplit:
    train: LabeledDataset
    validation: LabeledDataset
    test: LabeledDataset
    seed: int
    train_idx: np.ndarray = field(repr=False)
    val_idx: np.ndarray = field(repr=False)
    test_idx: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    stddev: np.ndarray

    def apply(self, data: LabeledDataset) -> LabeledDataset:
        return apply_standardizer(self, data)


# ---------------------------------------------------------------------------
# CSV


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _sort_key(raw: str):
    return (0, float(raw), raw) if _is_number(raw) else (1, 0.0, raw)


def _read_rows(path: Path) -> list[list[str]]:
    if not path.exists():
        raise DataError(f"{path}: no such file")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8", newline="") as fh:
        rows = []
        for row in csv.reader(fh):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if row[0].lstrip().startswith("@"):  # ARFF/KEEL header lines
                continue
            rows.append([c.strip() for c in row])
    return rows


def _looks_like_header(row: list[str], label_column: int, drop_columns) -> bool:
    # a header has no numeric cell outside the label and dropped columns
    width = len(row)
    skip = {c % width for c in (label_column, *drop_columns) if isinstance(c, int) and -width <= c < width}
    cells = [c for j, c in enumerate(row) if j not in skip]
    return bool(cells) and not any(_is_number(c) for c in cells)


def load_csv(
    path: str | os.PathLike,
    label_column: int | str = -1,
    positive_value: str | None = None,
    drop_columns: Iterable[int | str] = (),
) -> LabeledDataset:
    """Read a comma-separated file into a :class:`LabeledDataset`.

    The first row is taken as a header when none of its feature cells is
    numeric.
    ``label_column`` is a column index (negative allowed) or a header name.
    The raw label equal to ``positive_value`` maps to +1; without it the
    smaller raw value (numeric order if both parse as numbers) maps to -1.
    A file whose labels are already encoded as -1/+1 may contain a single
    class.
    """
    path = Path(path)
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: no data rows")

    width = len(rows[0])
    header = None
    if isinstance(label_column, str) or _looks_like_header(rows[0], label_column, drop_columns):
        header, rows = rows[0], rows[1:]
        if not rows:
            raise DataError(f"{path}: header but no data rows")

    def resolve(col: int | str) -> int:
        if isinstance(col, str):
            if header is None or col not in header:
                raise DataError(f"{path}: no column named {col!r}")
            return header.index(col)
        if not -width <= col < width:
            raise DataError(f"{path}: column {col} out of range for {width} columns")
        return col % width

    label_idx = resolve(label_column)
    dropped = {resolve(c) for c in drop_columns}
    feature_cols = [c for c in range(width) if c != label_idx and c not in dropped]

    first_line = 2 if header is not None else 1
    features = np.empty((len(rows), len(feature_cols)), dtype=np.float64)
    raw_labels = []
    for r, row in enumerate(rows):
        lineno = r + first_line
        if len(row) != width:
            raise DataError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
        for j, c in enumerate(feature_cols):
            try:
                features[r, j] = float(row[c])
            except ValueError:
                raise DataError(
                    f"{path}: row {lineno}: non-numeric feature {row[c]!r} in column {c}"
                ) from None
        raw_labels.append(row[label_idx])

    if not np.all(np.isfinite(features)):
        bad = int(np.argwhere(~np.isfinite(features))[0, 0]) + first_line
        raise DataError(f"{path}: row {bad}: non-finite feature value")

    y = _map_labels(raw_labels, positive_value, path, first_line)
    return LabeledDataset(features, y)


def _map_labels(raw: list[str], positive_value, path, first_line) -> np.ndarray:
    distinct = sorted(set(raw), key=_sort_key)
    if positive_value is None and all(_is_number(v) and float(v) in (-1.0, 1.0) for v in distinct):
        return np.array([1 if float(v) > 0 else -1 for v in raw], dtype=np.int64)
    if len(distinct) != 2:
        # report the first row that introduces a third value, or the lone value
        seen: list[str] = []
        for r, v in enumerate(raw):
            if v not in seen:
                seen.append(v)
                if len(seen) == 3:
                    raise DataError(
                        f"{path}: row {r + first_line}: third distinct label {v!r}; "
                        "binary labels required"
                    )
        raise DataError(f"{path}: found {len(distinct)} distinct label value(s), need exactly 2")
    if positive_value is not None:
        positive_value = str(positive_value)
        if positive_value not in distinct:
            raise DataError(f"{path}: positive label {positive_value!r} not present")
        positive = positive_value
    else:
        positive = distinct[1]
    return np.array([1 if v == positive else -1 for v in raw], dtype=np.int64)


def format_float(x: float) -> str:
    return repr(float(x))


def dataset_to_csv_text(data: LabeledDataset) -> str:
    buf = io.StringIO()
    for row, label in zip(data.X, data.y):
        buf.write(",".join(format_float(v) for v in row))
        buf.write(",+1\n" if label == 1 else ",-1\n")
    return buf.getvalue()


def save_csv(data: LabeledDataset, path: str | os.PathLike) -> None:
    """Write the canonical form: features in order, label last as -1/+1."""
    from .io import atomic_write_text

    atomic_write_text(path, dataset_to_csv_text(data))


# ---------------------------------------------------------------------------
# MNIST


def _read_idx(path: Path) -> np.ndarray:
    opener = gzip.open if path.suffix == ".gz" else open
    try:
        with opener(path, "rb") as fh:
            raw = fh.read()
    except (OSError, EOFError) as exc:
        raise DataError(f"{path}: cannot read IDX file ({exc})") from None
    if len(raw) < 4:
        raise DataError(f"{path}: truncated IDX header")
    zero, dtype_code, ndim = struct.unpack(">HBB", raw[:4])
    if zero != 0 or dtype_code != 0x08:
        raise DataError(f"{path}: not an unsigned-byte IDX file")
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise DataError(f"{path}: truncated IDX header")
    shape = struct.unpack(f">{ndim}I", raw[4:header_len])
    count = int(np.prod(shape)) if shape else 0
    body = np.frombuffer(raw, dtype=np.uint8, offset=header_len)
    if body.size != count:
        raise DataError(f"{path}: expected {count} bytes of data, found {body.size}")
    return body.reshape(shape)


def load_mnist(source: str | os.PathLike, labels: str | os.PathLike | None = None):
    """Load raw MNIST as ``(pixels uint8 (n, 784), digits int (n,))``.

    ``source`` is either an IDX image file (``labels`` then names the IDX
    label file) or a CSV with the digit in the first column followed by the
    784 pixel values.
    """
    source = Path(source)
    if labels is not None:
        images = _read_idx(source)
        digits = _read_idx(Path(labels))
        if images.ndim != 3 or digits.ndim != 1 or images.shape[0] != digits.shape[0]:
            raise DataError(f"{source}: image/label IDX shapes do not match")
        return images.reshape(images.shape[0], -1), digits.astype(np.int64)

    rows = _read_rows(source)
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    try:
        arr = np.array(rows, dtype=np.float64)
    except ValueError:
        raise DataError(f"{source}: corrupt MNIST CSV (ragged or non-numeric rows)") from None
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise DataError(f"{source}: corrupt MNIST CSV")
    return arr[:, 1:].astype(np.uint8), arr[:, 0].astype(np.int64)


def binarize_mnist(pixels: np.ndarray, digits: np.ndarray, class_a: int, class_b: int) -> LabeledDataset:
    """Keep digits ``class_a`` (+1) and ``class_b`` (-1); pixels scaled to [0, 1]."""
    if class_a == class_b:
        raise DataError(f"class_a and class_b must differ (both {class_a})")
    digits = np.asarray(digits)
    keep = (digits == class_a) | (digits == class_b)
    for c in (class_a, class_b):
        if not np.any(digits == c):
            raise DataError(f"no examples of digit {c}")
    X = np.asarray(pixels, dtype=np.float64)[keep] / 255.0
    y = np.where(digits[keep] == class_a, 1, -1)
    return LabeledDataset(X, y)


# ---------------------------------------------------------------------------
# splits and scaling


def random_split(data: LabeledDataset, n_train: int, n_val: int, seed: int) -> DataSplit:
    if n_train < 1 or n_val < 1:
        raise DataError("n_train and n_val must be positive")
    if n_train + n_val >= data.m:
        raise DataError(
            f"split sizes {n_train}+{n_val} leave no test data from {data.m} examples"
        )
    perm = np.random.default_rng(seed).permutation(data.m)
    tr, va, te = perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]
    return DataSplit(
        train=data.subset(tr),
        validation=data.subset(va),
        test=data.subset(te),
        seed=seed,
        train_idx=tr,
        val_idx=va,
        test_idx=te,
    )


def subsample(data: LabeledDataset, n: int, seed: int) -> LabeledDataset:
    """Seeded subsample of ``n`` rows (kept in original order)."""
    if n >= data.m:
        return data
    idx = np.sort(np.random.default_rng(seed).choice(data.m, size=n, replace=False))
    return data.subset(idx)


def fit_standardizer(train: LabeledDataset) -> Standardizer:
    if train.m == 0:
        raise DataError("cannot fit a standardizer on an empty dataset")
    mean = train.X.mean(axis=0)
    # summation rounding can move the mean of a constant column off its value
    const = np.all(train.X == train.X[0], axis=0)
    mean[const] = train.X[0, const]
    std = np.maximum(train.X.std(axis=0), STD_FLOOR)
    return Standardizer(mean, std)


def apply_standardizer(s: Standardizer, data: LabeledDataset) -> LabeledDataset:
    if data.dim != s.mean.shape[0]:
        raise DataError(f"standardizer has dimension {s.mean.shape[0]}, data has {data.dim}")
    return LabeledDataset((data.X - s.mean) / s.stddev, data.y)


def make_blobs(
    n_per_class: int,
    dim: int = 2,
    separation: float = 6.0,
    seed: int = 0,
    sigma: float = 1.0,
) -> LabeledDataset:
    """Two isotropic Gaussian blobs whose centres are ``separation`` sigmas apart.

    The -1 block comes first, then the +1 block.
    """
    rng = np.random.default_rng(seed)
    centre = np.zeros(dim)
    centre[0] = separation * sigma / 2.0
    neg = rng.normal(size=(n_per_class, dim)) * sigma - centre
    pos = rng.normal(size=(n_per_class, dim)) * sigma + centre
    X = np.vstack([neg, pos])
    y = np.r_[-np.ones(n_per_class), np.ones(n_per_class)]
    return LabeledDataset(X, y)
