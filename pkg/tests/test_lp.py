from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from scipy import sparse

from congestion_tolls.errors import ConfigError
from congestion_tolls.lp import LinearProgram, solve_lp

BACKENDS = ["highs", "simplex", "exact"]


def _lp(c, A, senses, b, lo=None, hi=None):
    c = np.asarray(c, dtype=float)
    lo = np.zeros(len(c)) if lo is None else np.asarray(lo, dtype=float)
    hi = np.full(len(c), np.inf) if hi is None else np.asarray(hi, dtype=float)
    return LinearProgram(c, sparse.csr_matrix(np.asarray(A, dtype=float)), tuple(senses), np.asarray(b, dtype=float), lo, hi)


@pytest.mark.parametrize("backend", BACKENDS)
def test_textbook_maximum(backend):
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36
    lp = _lp([3, 5], [[1, 0], [0, 2], [3, 2]], ["<="] * 3, [4, 12, 18])
    sol = solve_lp(lp, backend=backend)
    assert sol.optimal
    assert sol.objective == pytest.approx(36.0, abs=1e-9)
    assert np.allclose(sol.values, [2, 6])


@pytest.mark.parametrize("backend", BACKENDS)
def test_equality_and_free_variables(backend):
    # max -x - y with x - y = 1, x free, y >= -2 -> x = -1, y = -2
    lp = _lp([-1, -1], [[1, -1]], ["=="], [1], lo=[-np.inf, -2])
    sol = solve_lp(lp, backend=backend)
    assert sol.optimal
    assert np.allclose(sol.values, [-1, -2])


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible(backend):
    lp = _lp([1], [[1], [1]], ["<=", ">="], [1, 2])
    assert solve_lp(lp, backend=backend).status == "infeasible"


@pytest.mark.parametrize("backend", BACKENDS)
def test_unbounded(backend):
    lp = _lp([1, 0], [[-1, 1]], ["<="], [1])
    assert solve_lp(lp, backend=backend).status == "unbounded"


def test_exact_backend_returns_rationals():
    lp = _lp([1, 1], [[3, 1], [1, 3]], ["<=", "<="], [1, 1])
    sol = solve_lp(lp, backend="exact")
    assert sol.exact_values is not None
    assert all(v == Fraction(1, 4) for v in sol.exact_values)


def test_unknown_backend():
    lp = _lp([1], [[1]], ["<="], [1])
    with pytest.raises(ConfigError):
        solve_lp(lp, backend="cplex")


def test_residual_is_zero_at_optimum():
    lp = _lp([3, 5], [[1, 0], [0, 2], [3, 2]], ["<="] * 3, [4, 12, 18])
    assert lp.residual(np.array([2.0, 6.0])) <= 1e-15
    assert lp.residual(np.array([5.0, 6.0])) > 0


@pytest.mark.parametrize("seed", range(10))
def test_backends_agree_on_random_bounded_lps(seed):
    rng = np.random.default_rng(seed)
    m, k = 6, 4
    A = rng.uniform(0.1, 2.0, size=(m, k))
    b = rng.uniform(1.0, 5.0, size=m)
    c = rng.uniform(-1.0, 2.0, size=k)
    lp = _lp(c, A, ["<="] * m, b)
    vals = [solve_lp(lp, backend=be).objective for be in BACKENDS]
    assert max(vals) - min(vals) <= 1e-9
