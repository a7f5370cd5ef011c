import numpy as np
import pytest

from mmlab.mmcore import validate_space


def random_metric(rng, n, kind=None):
    """A random metric on n points: Euclidean, shortest-path or ultrametric-like."""
    kind = kind or rng.choice(["euclid", "graph", "discrete"])
    if n == 1:
        return np.zeros((1, 1))
    if kind == "euclid":
        P = rng.random((n, int(rng.integers(1, 4))))
        D = np.sqrt(((P[:, None] - P[None]) ** 2).sum(-1))
    elif kind == "graph":
        W = rng.random((n, n)) + 0.05
        W = np.minimum(W, W.T)
        D = W.copy()
        np.fill_diagonal(D, 0.0)
        for k in range(n):
            D = np.minimum(D, D[:, k, None] + D[None, k, :])
    else:
        vals = rng.choice([0.5, 1.0], size=(n, n))
        D = np.triu(vals, 1)
        D = D + D.T
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def random_weights(rng, n, integer=False):
    if integer:
        w = rng.integers(1, 5, size=n).astype(float)
    else:
        w = rng.random(n) + 0.05
    return w / w.sum()


def random_space(rng, n, kind=None, integer=False):
    return validate_space(list(range(n)), random_metric(rng, n, kind), random_weights(rng, n, integer))


def random_measure(rng, n, sparsity=0.3):
    w = rng.random(n)
    w[rng.random(n) < sparsity] = 0.0
    if w.sum() == 0:
        w[int(rng.integers(n))] = 1.0
    return w / w.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# acceptance verdicts, one line per criterion at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
