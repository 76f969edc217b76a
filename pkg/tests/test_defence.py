import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelflip.dataset import LabeledDataset, make_blobs
from labelflip.defence import (
    DefenceConfig,
    confidence,
    knn_indices,
    mode_label,
    sanitize,
    sanitize_pass,
)
from labelflip.errors import ConfigError, DataError

import reference as R


def line(labels):
    return LabeledDataset(np.arange(len(labels), dtype=float)[:, None], labels)


def test_knn_examples():
    d = LabeledDataset([[0.0], [1.0], [10.0]], [1, 1, 1])
    assert knn_indices(d, 0, 1) == [1]
    dup = LabeledDataset([[3.0], [3.0], [0.0]], [1, 1, 1])
    assert knn_indices(dup, 0, 1) == [1]
    sq = LabeledDataset([[0, 0], [1, 0], [0, 1], [5, 5]], [1, 1, 1, 1])
    assert knn_indices(sq, 0, 2) == [1, 2]


def test_knn_range():
    d = line([1, 1, 1])
    for k in (0, 3):
        with pytest.raises(DataError):
            knn_indices(d, 0, k)


def test_knn_matches_reference():
    d = make_blobs(15, dim=3, separation=1.0, seed=3)
    for i in range(d.m):
        assert knn_indices(d, i, 5) == R.knn(d.X, i, 5)


def test_confidence_and_mode():
    assert confidence([1, 1, -1]) == pytest.approx(2 / 3)
    assert mode_label([1, 1, -1]) == 1
    assert confidence([1, 1, 1, 1]) == 1.0
    assert mode_label([-1, -1, 1]) == -1
    assert (confidence([1, -1]), mode_label([1, -1])) == (0.5, 1)
    assert (confidence([-1, 1]), mode_label([-1, 1])) == (0.5, 1)
    with pytest.raises(DataError):
        confidence([])


def test_config_ranges():
    for bad in (dict(k=0), dict(eta=0.49), dict(eta=1.01), dict(max_passes=0)):
        with pytest.raises(ConfigError):
            DefenceConfig(**bad)


def test_pure_clusters_unchanged():
    d = make_blobs(12, separation=8.0, seed=2)
    out, changed = sanitize_pass(d, DefenceConfig(3, 0.5))
    assert changed == [] and out == d


def test_interior_outlier_restored():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(size=(10, 2)) * 0.1, [[0.0, 0.0]]])
    d = LabeledDataset(X, [1] * 10 + [-1])
    out, changed = sanitize_pass(d, DefenceConfig(3, 0.5))
    assert changed == [10] and out.y[10] == 1


def test_eta_one_needs_unanimity():
    # point 0 sees (+1, +1, -1) at k=3
    d = LabeledDataset([[0.0], [1.0], [2.0], [3.0], [100.0]], [-1, 1, 1, -1, -1])
    _, changed = sanitize_pass(d, DefenceConfig(3, 1.0))
    assert 0 not in changed
    _, changed = sanitize_pass(d, DefenceConfig(3, 0.5))
    assert 0 in changed


def test_even_k_tie_keeps_label():
    d = LabeledDataset([[0.0], [-1.0], [1.0]], [-1, 1, -1])
    out, _ = sanitize_pass(d, DefenceConfig(2, 0.5))
    assert out.y[0] == -1


def test_synchronous_update():
    # with in-place updates point 1 would see the already-relabelled point 0
    d = line([-1, 1, 1, -1, -1])
    out, changed = sanitize_pass(d, DefenceConfig(2, 1.0))
    expected = R.sanitize_once(d.X, d.y, 2, 1.0)
    assert out.y.tolist() == expected


def test_chain_fixpoint_hand_simulation():
    # pass 1: point 0 sees (+1, +1) -> +1; point 1 sees (-1, +1) -> tie, kept.
    # pass 2: nothing changes.
    d = line([-1, 1, 1, 1, 1])
    out, rep = sanitize(d, DefenceConfig(2, 1.0, max_passes=10))
    assert out.y.tolist() == [1, 1, 1, 1, 1]
    assert rep.relabeled_indices_per_pass == [[0], []]
    assert rep.passes_run == 2 and rep.converged
    assert rep.changes == [(1, 0, -1, 1)]


def test_single_pass_default():
    d = line([-1, 1, 1, 1, 1])
    _, rep = sanitize(d, DefenceConfig(2, 1.0))
    assert rep.passes_run == 1 and not rep.converged


def test_already_at_fixpoint():
    d = make_blobs(10, separation=8.0, seed=1)
    out, rep = sanitize(d, DefenceConfig(3, 0.5, 5))
    assert out == d and rep.passes_run == 1 and rep.converged and rep.n_relabeled == 0


def test_too_small():
    with pytest.raises(DataError):
        sanitize(line([1, -1]), DefenceConfig(2, 0.5))


def test_matches_reference_pass():
    d = make_blobs(20, dim=2, separation=1.5, seed=4)
    for k, eta in ((1, 0.5), (3, 0.5), (4, 0.75), (5, 0.8), (6, 0.5)):
        out, _ = sanitize_pass(d, DefenceConfig(k, eta))
        assert out.y.tolist() == R.sanitize_once(d.X, d.y, k, eta)


noisy_sets = st.builds(
    lambda seed, n, flip: (seed, n, flip),
    st.integers(0, 10_000), st.integers(6, 25), st.floats(0.0, 0.4),
)


def _noisy(seed, n, flip):
    d = make_blobs(n, dim=2, separation=2.0, seed=seed)
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(d.m) < flip, -d.y, d.y)
    return d.with_labels(y)


@settings(max_examples=40, deadline=None)
@given(noisy_sets, st.sampled_from([1, 3, 5]))
def test_label_symmetry_odd_k(params, k):
    d = _noisy(*params)
    out, _ = sanitize(d, DefenceConfig(k, 0.5, 3))
    neg, _ = sanitize(d.with_labels(-d.y), DefenceConfig(k, 0.5, 3))
    assert np.array_equal(neg.y, -out.y)
    assert np.array_equal(out.X, d.X)


@settings(max_examples=40, deadline=None)
@given(noisy_sets, st.integers(1, 9))
def test_relabel_sets_shrink_with_eta(params, k):
    d = _noisy(*params)
    prev = None
    for eta in (0.5, 0.6, 0.7, 0.8, 0.9, 1.0):
        _, changed = sanitize_pass(d, DefenceConfig(k, eta))
        if prev is not None:
            assert set(changed) <= prev
        prev = set(changed)


@settings(max_examples=40, deadline=None)
@given(noisy_sets, st.integers(1, 5))
def test_eta_half_fixes_every_disagreeing_majority(params, k):
    d = _noisy(*params)
    _, changed = sanitize_pass(d, DefenceConfig(k, 0.5))
    for i in range(d.m):
        nb = d.y[knn_indices(d, i, k)]
        pos, neg = int(np.sum(nb == 1)), int(np.sum(nb == -1))
        disagrees = (pos > neg and d.y[i] == -1) or (neg > pos and d.y[i] == 1)
        assert (i in changed) == disagrees


def test_strict_threshold_only_unanimous():
    d = _noisy(5, 20, 0.3)
    k = 4
    _, changed = sanitize_pass(d, DefenceConfig(k, (k - 1) / k + 0.01))
    for i in changed:
        assert len(set(d.y[knn_indices(d, i, k)].tolist())) == 1


def test_identity_on_clean_separated_blobs():
    d = make_blobs(12, separation=10.0, seed=9)
    for k in range(1, 12):
        for eta in (0.5, 0.75, 1.0):
            out, rep = sanitize(d, DefenceConfig(k, eta, 3))
            assert out == d and rep.n_relabeled == 0


def test_pluggable_distance():
    manhattan = lambda X, x: np.abs(X - x).sum(axis=1)
    # from the origin: (2, 0) is 2 away under both; (1.3, 1.3) is 1.84 euclidean, 2.6 manhattan
    d = LabeledDataset([[0, 0], [2, 0], [1.3, 1.3]], [1, 1, 1])
    assert knn_indices(d, 0, 1) == [2]
    assert knn_indices(d, 0, 1, distance=manhattan) == [1]
