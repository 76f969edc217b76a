"""Where the benchmark datasets come from and how they become canonical CSVs.

Library code never touches the network; :func:`fetch` is only called from
the ``fetch`` subcommand. Each dataset can also be built from a local copy
via ``source=``.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import tempfile
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset, binarize_mnist, dataset_to_csv_text, load_csv, load_mnist
from .errors import DataError
from .io import atomic_write_text, sha256_file

log = logging.getLogger(__name__)

DATA_DIR_ENV = "LABELFLIP_DATA_DIR"
MANIFEST = "manifest.json"

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"
MNIST_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist"


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    urls: tuple[str, ...]
    n_features: int
    description: str


DATASETS = {
    "breastcancer": DatasetInfo(
        "breastcancer",
        (f"{UCI}/breast-cancer-wisconsin/wdbc.data",),
        30,
        "Wisconsin diagnostic breast cancer; malignant is +1",
    ),
    "spambase": DatasetInfo(
        "spambase",
        (f"{UCI}/spambase/spambase.data",),
        57,
        "UCI Spambase; spam is +1",
    ),
    "mnist17": DatasetInfo(
        "mnist17",
        (
            f"{MNIST_MIRROR}/train-images-idx3-ubyte.gz",
            f"{MNIST_MIRROR}/train-labels-idx1-ubyte.gz",
        ),
        784,
        "MNIST training set, digit 1 (+1) versus digit 7 (-1)",
    ),
}


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV) or Path.home() / ".cache" / "labelflip")


def _download(url: str, dest: Path) -> Path:
    log.info("downloading %s", url)
    try:
        with urllib.request.urlopen(url, timeout=60) as resp, open(dest, "wb") as fh:
            shutil.copyfileobj(resp, fh)
    except OSError as exc:
        raise DataError(f"download of {url} failed ({exc}); pass a local copy with --source") from None
    return dest


def _sklearn_breast_cancer() -> LabeledDataset | None:
    try:
        from sklearn.datasets import load_breast_cancer
    except ImportError:
        return None
    bunch = load_breast_cancer()
    return LabeledDataset(bunch.data, np.where(bunch.target == 0, 1, -1))


def build_breastcancer(source: Path | None, workdir: Path) -> LabeledDataset:
    if source is None:
        try:
            source = _download(DATASETS["breastcancer"].urls[0], workdir / "wdbc.data")
        except DataError:
            data = _sklearn_breast_cancer()
            if data is None:
                raise
            log.warning("download failed; using the copy bundled with scikit-learn")
            return data
    return load_csv(source, label_column=1, positive_value="M", drop_columns=[0])


def build_spambase(source: Path | None, workdir: Path) -> LabeledDataset:
    # accepts the UCI spambase.data or the KEEL spambase.dat (optionally gzipped)
    if source is None:
        source = _download(DATASETS["spambase"].urls[0], workdir / "spambase.data")
    return load_csv(source, label_column=-1, positive_value="1")


def build_mnist17(source: Path | None, workdir: Path) -> LabeledDataset:
    if source is None:
        img = _download(DATASETS["mnist17"].urls[0], workdir / "train-images-idx3-ubyte.gz")
        lab = _download(DATASETS["mnist17"].urls[1], workdir / "train-labels-idx1-ubyte.gz")
        pixels, digits = load_mnist(img, lab)
    elif source.is_dir():
        img = next(iter(sorted(source.glob("train-images*"))), None)
        lab = next(iter(sorted(source.glob("train-labels*"))), None)
        if img is None or lab is None:
            raise DataError(f"{source}: expected train-images* and train-labels* IDX files")
        pixels, digits = load_mnist(img, lab)
    else:
        pixels, digits = load_mnist(source)
    return binarize_mnist(pixels, digits, 1, 7)


BUILDERS = {"breastcancer": build_breastcancer, "spambase": build_spambase, "mnist17": build_mnist17}


def _read_manifest(out_dir: Path) -> dict:
    path = out_dir / MANIFEST
    if not path.exists():
        return {}
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        raise DataError(f"{path}: corrupt manifest") from None


def fetch(name: str, out_dir: str | os.PathLike, source: str | os.PathLike | None = None) -> tuple[Path, bool]:
    """Write ``<out_dir>/<name>.csv`` and record its checksum in the manifest.

    Returns ``(path, written)``; ``written`` is False when the file was
    already present with the recorded checksum. A present file whose
    checksum disagrees with the manifest is an error.
    """
    if name not in BUILDERS:
        raise DataError(f"unknown dataset {name!r}; choose from {', '.join(BUILDERS)}")
    out_dir = Path(out_dir)
    target = out_dir / f"{name}.csv"
    manifest = _read_manifest(out_dir)
    if target.exists() and name in manifest:
        actual = sha256_file(target)
        if actual != manifest[name]["sha256"]:
            raise DataError(f"{target}: checksum mismatch against {MANIFEST}; delete the file to re-fetch")
        return target, False

    with tempfile.TemporaryDirectory() as tmp:
        data = BUILDERS[name](Path(source) if source is not None else None, Path(tmp))
    atomic_write_text(target, dataset_to_csv_text(data))
    pos, neg = data.class_counts()
    manifest[name] = {
        "file": target.name,
        "sha256": sha256_file(target),
        "rows": data.m,
        "features": data.dim,
        "positive": pos,
        "negative": neg,
    }
    atomic_write_text(out_dir / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return target, True


def resolve_dataset(dataset: str, data_dir: str | os.PathLike | None = None) -> tuple[str, LabeledDataset]:
    """Map a dataset id or CSV path to ``(name, data)``.

    An existing file path is read as a canonical CSV named after its stem;
    otherwise ``<data_dir>/<dataset>.csv`` is used.
    """
    path = Path(dataset)
    if path.is_file():
        return path.stem, load_csv(path)
    base = Path(data_dir) if data_dir is not None else default_data_dir()
    candidate = base / f"{dataset}.csv"
    if not candidate.is_file():
        raise DataError(f"dataset {dataset!r} not found at {candidate}; run `labelflip fetch {dataset}` first")
    return dataset, load_csv(candidate)
