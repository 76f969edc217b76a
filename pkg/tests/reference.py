"""Slow, dependency-free reference implementations used as test oracles."""

import numpy as np


def sgd(X, y, lr=0.01, epochs=100, seed=0, shuffle=True, fit_bias=True):
    X = [list(map(float, row)) for row in np.asarray(X)]
    y = [int(v) for v in y]
    m, d = len(X), len(X[0])
    w, b = [0.0] * d, 0.0
    for e in range(epochs):
        order = np.random.default_rng([seed, e]).permutation(m).tolist() if shuffle else range(m)
        for i in order:
            s = b
            for j in range(d):
                s += w[j] * X[i][j]
            if y[i] * s < 1.0:
                for j in range(d):
                    w[j] += lr * y[i] * X[i][j]
                if fit_bias:
                    b += lr * y[i]
    return w, b


def mean_hinge(w, b, X, y):
    total = 0.0
    for row, label in zip(np.asarray(X).tolist(), y):
        score = b + sum(wj * xj for wj, xj in zip(w, row))
        total += max(0.0, 1.0 - int(label) * score)
    return total / len(y)


def zero_one(w, b, X, y):
    wrong = 0
    for row, label in zip(np.asarray(X).tolist(), y):
        score = b + sum(wj * xj for wj, xj in zip(w, row))
        wrong += (1 if score >= 0 else -1) != int(label)
    return wrong / len(y)


def knn(X, i, k):
    X = np.asarray(X).tolist()
    dists = []
    for j, row in enumerate(X):
        if j != i:
            dists.append((sum((a - c) ** 2 for a, c in zip(row, X[i])), j))
    dists.sort()
    return [j for _, j in dists[:k]]


def sanitize_once(X, y, k, eta):
    y = [int(v) for v in y]
    out = list(y)
    for i in range(len(y)):
        labels = [y[j] for j in knn(X, i, k)]
        pos = labels.count(1)
        neg = k - pos
        if pos != neg and max(pos, neg) / k >= eta:
            out[i] = 1 if pos > neg else -1
    return out
