import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelflip.dataset import Example, LabeledDataset, make_blobs
from labelflip.errors import ConfigError, DataError
from labelflip.linear_model import (
    TrainConfig,
    Weights,
    avg_loss,
    hinge_loss,
    hinge_subgradient,
    load_weights,
    predict,
    save_weights,
    train_sgd,
    zero_one_error,
)

import reference as R


def W(w, b=0.0):
    return Weights(np.array(w, dtype=float), b)


def ex(x, y):
    return Example(np.array(x, dtype=float), y)


@pytest.mark.parametrize(
    "w, x, y, expected",
    [
        ((1, 0), (2, 0), 1, 0.0),
        ((0, 0), (3, -7), 1, 1.0),
        ((0, 0), (3, -7), -1, 1.0),
        ((1, 0), (2, 0), -1, 3.0),
    ],
)
def test_hinge_loss(w, x, y, expected):
    assert hinge_loss(W(w), ex(x, y)) == expected


def test_hinge_dimension_mismatch():
    with pytest.raises(DataError):
        hinge_loss(W((1, 0)), ex((1, 2, 3), 1))


def test_subgradient_branches():
    g, gb = hinge_subgradient(W((0, 0)), ex((2, 0), 1))
    assert g.tolist() == [-2.0, 0.0] and gb == -1.0
    g, gb = hinge_subgradient(W((0.5, 0)), ex((2, 0), 1))  # margin exactly 1
    assert g.tolist() == [0.0, 0.0] and gb == 0.0


def finite_difference(weights, example, h=1e-6):
    def f(w, b):
        return hinge_loss(Weights(w, b), example)

    g = np.empty(weights.dim)
    for j in range(weights.dim):
        e = np.zeros(weights.dim)
        e[j] = h
        g[j] = (f(weights.w + e, weights.bias) - f(weights.w - e, weights.bias)) / (2 * h)
    gb = (f(weights.w, weights.bias + h) - f(weights.w, weights.bias - h)) / (2 * h)
    return g, gb


def random_points(n, seed, min_gap=1e-3):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        d = int(rng.integers(1, 6))
        w, x = rng.normal(size=d), rng.normal(size=d)
        b, y = float(rng.normal()), int(rng.choice([-1, 1]))
        if abs(y * (w @ x + b) - 1) > min_gap:
            out.append((Weights(w, b), Example(x, y)))
    return out


def test_subgradient_matches_finite_differences():
    for weights, example in random_points(200, seed=3):
        g, gb = hinge_subgradient(weights, example)
        fd, fdb = finite_difference(weights, example)
        assert np.allclose(g, fd, atol=1e-5) and abs(gb - fdb) <= 1e-5


@settings(max_examples=200)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(-5, 5), st.sampled_from([-1, 1]))
def test_hinge_nonnegative_and_zero_iff_margin(vals, b, y):
    w = Weights(np.array(vals[:2]), b)
    e = ex((vals[2], 1.0), y)
    m = y * (w.w @ e.features + b)
    loss = hinge_loss(w, e)
    assert loss >= 0
    assert (loss == 0) == (m >= 1)


def test_predict_examples():
    assert predict(W((1, 0)), np.array([3.0, 5.0])) == 1
    assert predict(W((1, 0)), np.array([0.0, 9.0])) == 1
    assert predict(W((-2, 1), 0.5), np.array([1.0, 0.0])) == -1


@settings(max_examples=100)
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4), st.floats(1e-3, 1e3))
def test_predict_scale_invariant(vals, c):
    w = Weights(np.array(vals[:2]), vals[2])
    x = np.array([vals[3], 1.0])
    score = w.w @ x + w.bias
    if abs(score) < 1e-9:
        return
    assert predict(w, x) == predict(Weights(c * w.w, c * w.bias), x)


def test_avg_loss_and_error():
    d = LabeledDataset([[2.0, 0.0], [2.0, 0.0]], [1, -1])
    assert avg_loss(W((1, 0)), d) == 1.5
    assert avg_loss(W((0, 0)), d) == 1.0
    single = LabeledDataset([[2.0, 0.0]], [-1])
    assert avg_loss(W((1, 0)), single) == hinge_loss(W((1, 0)), single[0])
    four = LabeledDataset([[1.0], [2.0], [-1.0], [-2.0]], [1, 1, -1, 1])
    assert zero_one_error(W((1,)), four) == 0.25
    with pytest.raises(DataError):
        avg_loss(W((1,)), four.subset([]))


def test_inverted_classifier_error():
    d = make_blobs(30, seed=4)
    w = W((0.7, -0.3), 0.1)
    assert zero_one_error(Weights(-w.w, -w.bias), d) == pytest.approx(1 - zero_one_error(w, d))


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0)


def test_two_point_separation():
    d = LabeledDataset([[-1.0], [1.0]], [-1, 1])
    w = train_sgd(d, TrainConfig(0.01, 100))
    assert zero_one_error(w, d) == 0.0


def test_matches_reference_sgd():
    d = make_blobs(15, dim=3, separation=2.0, seed=5)
    for cfg in (TrainConfig(seed=9), TrainConfig(seed=1, shuffle=False), TrainConfig(seed=2, fit_bias=False)):
        w = train_sgd(d, cfg)
        rw, rb = R.sgd(d.X, d.y, cfg.learning_rate, cfg.epochs, cfg.seed, cfg.shuffle, cfg.fit_bias)
        assert np.array_equal(w.w, rw) and w.bias == rb
        if not cfg.fit_bias:
            assert w.bias == 0.0


def test_deterministic():
    d = make_blobs(20, seed=6)
    assert train_sgd(d, TrainConfig(seed=4)) == train_sgd(d, TrainConfig(seed=4))
    assert train_sgd(d, TrainConfig(seed=4)) != train_sgd(d, TrainConfig(seed=5))


def test_all_positive_labels():
    d = make_blobs(20, seed=7).with_labels(np.ones(40))
    w = train_sgd(d, TrainConfig())
    assert np.all(d.X @ w.w + w.bias > 0)


def test_separable_blobs_zero_training_error():
    d = make_blobs(50, dim=2, separation=6.0, seed=0)
    assert zero_one_error(train_sgd(d, TrainConfig()), d) == 0.0


def test_narrow_margin_blobs_need_more_epochs():
    # this draw is separable but its margin is small; 100 epochs stop short
    d = make_blobs(50, dim=2, separation=6.0, seed=8)
    assert zero_one_error(train_sgd(d, TrainConfig(epochs=100)), d) == 0.01
    assert zero_one_error(train_sgd(d, TrainConfig(epochs=200)), d) == 0.0


def test_empty_training_set():
    with pytest.raises(DataError):
        train_sgd(LabeledDataset(np.empty((0, 2)), np.empty(0)), TrainConfig())


def test_weights_text_round_trip(tmp_path):
    w = Weights(np.array([0.1, -2.5e-7, 3.0]), -0.125)
    save_weights(w, tmp_path / "w.txt")
    assert (tmp_path / "w.txt").read_text().splitlines() == ["0.1", "-2.5e-07", "3.0", "-0.125"]
    assert load_weights(tmp_path / "w.txt") == w
