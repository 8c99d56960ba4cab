import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from mkot.measure import make_marginal


def uniform(points, label=""):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    return make_marginal(pts, np.full(len(pts), 1.0 / len(pts)), label)


def line(m, label=""):
    return uniform(np.arange(m, dtype=float), label)


def assignment_brute_force(C):
    """min over permutations of mean C[i, p(i)]: the uniform two-marginal optimum."""
    m = C.shape[0]
    best = math.inf
    for p in itertools.permutations(range(m)):
        best = min(best, math.fsum(C[i, p[i]] for i in range(m)) / m)
    return best


def highs_value(T, weights):
    """Transport LP optimum from scipy's HiGHS, built independently of the package."""
    shape = T.shape
    n = len(shape)
    cells = np.argwhere(np.isfinite(T))
    rows, cols, b = [], [], []
    r = 0
    for j in range(n):
        for i in range(shape[j]):
            hit = np.flatnonzero(cells[:, j] == i)
            rows.extend([r] * hit.size)
            cols.extend(hit.tolist())
            b.append(weights[j][i])
            r += 1
    A = np.zeros((r, len(cells)))
    A[rows, cols] = 1.0
    res = linprog(T[tuple(cells.T)], A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return res.fun


def brute_conjugate(T, vecs, j):
    """min over all cells through each point of slot j, by explicit enumeration."""
    out = np.full(T.shape[j], np.inf)
    for t in itertools.product(*[range(s) for s in T.shape]):
        if not np.isfinite(T[t]):
            continue
        val = T[t] - sum(vecs[k][t[k]] for k in range(len(t)) if k != j)
        out[t[j]] = min(out[t[j]], val)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
