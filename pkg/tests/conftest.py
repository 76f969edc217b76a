import sys
from pathlib import Path

import numpy as np
import pytest

from labelflip.dataset import LabeledDataset, make_blobs

TESTS = Path(__file__).parent
sys.path.insert(0, str(TESTS))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def blobs():
    return make_blobs(20, dim=2, separation=6.0, seed=1)


@pytest.fixture
def toy8():
    """m=8, d=2 blobs used by the small attack instances."""
    return make_blobs(4, dim=2, separation=3.0, seed=11)


@pytest.fixture
def toy8_val():
    return make_blobs(10, dim=2, separation=3.0, seed=12)


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the end-of-run report."""

    def record(number: int, text: str, ok: bool, detail: str = ""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}" + (f" ({detail})" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


def dataset(X, y) -> LabeledDataset:
    return LabeledDataset(np.asarray(X, dtype=float), np.asarray(y))
