"""Linear programs: one container type, three interchangeable backends.

``highs``   scipy's HiGHS dual simplex, sparse; the default for real work.
``simplex`` the dense two-phase simplex below, Bland's rule, float arithmetic.
``exact``   the same simplex over ``fractions.Fraction``; a test oracle for small LPs.

Every solution is re-substituted into the rows before it is returned.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ConfigError, NumericalFailure

FEAS_TOL = 1e-9
OPT_TOL = 1e-8

_LE, _GE, _EQ = "<=", ">=", "=="
_SENSES = {"<=": _LE, "≤": _LE, "<": _LE, ">=": _GE, "≥": _GE, ">": _GE, "==": _EQ, "=": _EQ}


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """maximize ``objective @ v`` subject to ``A v (senses) rhs`` and ``lower <= v <= upper``."""

    objective: np.ndarray
    A: sparse.csr_matrix
    senses: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        A = sparse.csr_matrix(self.A, dtype=float)
        rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        senses = tuple(_SENSES.get(s, s) for s in self.senses)
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if A.shape != (len(rhs), len(c)) or len(senses) != len(rhs):
            raise ConfigError(f"LP shape mismatch: A{A.shape}, {len(rhs)} rhs, {len(senses)} senses, {len(c)} vars")
        if len(lo) != len(c) or len(hi) != len(c):
            raise ConfigError("bounds must have one entry per variable")
        if any(s not in (_LE, _GE, _EQ) for s in senses):
            raise ConfigError(f"unknown row relation in {set(senses)}")
        if np.isnan(c).any() or np.isnan(A.data).any() or np.isnan(rhs).any():
            raise ConfigError("NaN in LP data")
        for name, val in (("objective", c), ("A", A), ("rhs", rhs), ("senses", senses), ("lower", lo), ("upper", hi)):
            object.__setattr__(self, name, val)

    @classmethod
    def from_rows(cls, objective, rows, bounds=None) -> "LinearProgram":
        """Build from ``rows = [(coefficients, relation, rhs), ...]``; default bounds are free."""
        c = np.asarray(objective, dtype=float)
        k = len(c)
        if rows:
            A = np.array([np.asarray(r[0], dtype=float) for r in rows]).reshape(len(rows), k)
        else:
            A = np.zeros((0, k))
        senses = tuple(r[1] for r in rows)
        rhs = np.array([float(r[2]) for r in rows])
        if bounds is None:
            bounds = [(None, None)] * k
        lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds], dtype=float)
        hi = np.array([np.inf if b[1] is None else b[1] for b in bounds], dtype=float)
        return cls(c, A, senses, rhs, lo, hi)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def row_violations(self, v: np.ndarray) -> np.ndarray:
        """Per-row violation, scaled by ``1 + max(|rhs|, max_j |a_j v_j|)``."""
        v = np.asarray(v, dtype=float)
        lhs = self.A @ v
        mag = abs(self.A).multiply(np.abs(v)[None, :]).max(axis=1)
        mag = np.asarray(mag.todense()).reshape(-1) if sparse.issparse(mag) else np.asarray(mag).reshape(-1)
        scale = 1.0 + np.maximum(np.abs(self.rhs), mag)
        viol = np.zeros(len(self.rhs))
        sen = np.array(self.senses)
        le, ge, eq = sen == _LE, sen == _GE, sen == _EQ
        viol[le] = np.maximum(0.0, lhs[le] - self.rhs[le])
        viol[ge] = np.maximum(0.0, self.rhs[ge] - lhs[ge])
        viol[eq] = np.abs(lhs[eq] - self.rhs[eq])
        return viol / scale

    def residual(self, v: np.ndarray) -> float:
        """Largest scaled row violation or bound violation."""
        v = np.asarray(v, dtype=float)
        viol = self.row_violations(v)
        worst = float(np.max(viol)) if len(viol) else 0.0
        bscale = 1.0 + np.abs(v)
        with np.errstate(invalid="ignore"):
            blo = np.where(np.isfinite(self.lower), np.maximum(0.0, self.lower - v), 0.0)
            bhi = np.where(np.isfinite(self.upper), np.maximum(0.0, v - self.upper), 0.0)
        if len(v):
            worst = max(worst, float(np.max((blo + bhi) / bscale)))
        return worst

    def dump(self, stream=None) -> str:
        """Plain text, one row per line: coefficients, relation, rhs."""
        out = io.StringIO()
        out.write("max " + " ".join(repr(float(c)) for c in self.objective) + "\n")
        dense = self.A.toarray()
        for row, s, r in zip(dense, self.senses, self.rhs):
            out.write(" ".join(repr(float(a)) for a in row) + f" {s} {float(r)!r}\n")
        for j, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            out.write(f"bound {j} {float(lo)!r} {float(hi)!r}\n")
        text = out.getvalue()
        if stream is not None:
            stream.write(text)
        return text


@dataclass(frozen=True, eq=False)
class LPSolution:
    status: str
    values: np.ndarray
    objective: float
    max_residual: float
    backend: str = "highs"
    exact_values: tuple | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def solve_lp(lp: LinearProgram, feas_tol: float = FEAS_TOL, backend: str = "highs") -> LPSolution:
    """Solve ``lp``; raises NumericalFailure when an optimal point misses ``feas_tol``."""
    if backend == "highs":
        sol = _solve_highs(lp)
    elif backend == "simplex":
        sol = _solve_dense(lp, exact=False)
    elif backend == "exact":
        sol = _solve_dense(lp, exact=True)
    else:
        raise ConfigError(f"unknown LP backend {backend!r}")
    if sol.optimal and sol.max_residual > feas_tol:
        raise NumericalFailure(
            f"LP residual {sol.max_residual:.3e} exceeds tolerance {feas_tol:.1e} ({backend})",
            residual=sol.max_residual,
        )
    return sol


# per-method time limits keep a stalled interior-point run on a degenerate
# program from blocking a whole search
_HIGHS_CHAIN = (
    ("highs-ds", {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10, "time_limit": 60.0}),
    ("highs-ds", {"time_limit": 60.0}),
    ("highs-ipm", {"time_limit": 15.0}),
)


def _solve_highs(lp: LinearProgram) -> LPSolution:
    A = lp.A
    sen = np.array(lp.senses)
    le, ge, eq = sen == _LE, sen == _GE, sen == _EQ
    ub_rows = []
    ub_rhs = []
    if le.any():
        ub_rows.append(A[le])
        ub_rhs.append(lp.rhs[le])
    if ge.any():
        ub_rows.append(-A[ge])
        ub_rhs.append(-lp.rhs[ge])
    kwargs = {}
    if ub_rows:
        kwargs["A_ub"] = sparse.vstack(ub_rows).tocsr()
        kwargs["b_ub"] = np.concatenate(ub_rhs)
    if eq.any():
        kwargs["A_eq"] = A[eq]
        kwargs["b_eq"] = lp.rhs[eq]
    bounds = np.stack([lp.lower, lp.upper], axis=1)
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi) for lo, hi in bounds]
    k = len(lp.objective)
    # Dual simplex first; interior point (with crossover) rescues the
    # degenerate programs that sit exactly on an optimal face. A method whose
    # point misses the residual tolerance hands over to the next one.
    best = None
    res = None
    for method, options in _HIGHS_CHAIN:
        res = linprog(-lp.objective, bounds=bounds, method=method, options=options, **kwargs)
        if res.status in (2, 3):
            break
        if res.status == 0 and res.x is not None:
            x = np.asarray(res.x, dtype=float)
            cand = LPSolution("optimal", x, float(lp.objective @ x), lp.residual(x), "highs")
            if best is None or cand.max_residual < best.max_residual:
                best = cand
            if best.max_residual <= FEAS_TOL:
                return best
    if best is not None:
        return best
    if res.status == 2:
        return LPSolution("infeasible", np.full(k, np.nan), np.nan, np.inf, "highs")
    if res.status == 3:
        return LPSolution("unbounded", np.full(k, np.nan), np.inf, np.inf, "highs")
    raise NumericalFailure(f"HiGHS failed: {res.message}")


# --- dense two-phase simplex -------------------------------------------------


def _solve_dense(lp: LinearProgram, exact: bool) -> LPSolution:
    conv = Fraction if exact else float
    zero, one = conv(0), conv(1)
    tol = 0 if exact else 1e-11
    k = len(lp.objective)
    dense = lp.A.toarray()

    # Substitute every original variable by nonnegative standard variables:
    # v_j = shift_j + sum_t sign_t * w_t.
    cols: list[tuple[int, int]] = []  # (original index, sign)
    shift = [zero] * k
    extra_rows: list[tuple[int, object]] = []  # w_t <= cap
    for j in range(k):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            shift[j] = conv(lo)
            cols.append((j, 1))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, conv(hi) - conv(lo)))
        elif np.isfinite(hi):
            shift[j] = conv(hi)
            cols.append((j, -1))
        else:
            cols.append((j, 1))
            cols.append((j, -1))
    nstd = len(cols)

    rows, senses, rhs = [], [], []
    for i in range(dense.shape[0]):
        coeff = [conv(a) for a in dense[i]]
        row = [coeff[j] * s for (j, s) in cols]
        b = conv(lp.rhs[i]) - sum((coeff[j] * shift[j] for j in range(k)), zero)
        rows.append(row)
        senses.append(lp.senses[i])
        rhs.append(b)
    for t, cap in extra_rows:
        row = [zero] * nstd
        row[t] = one
        rows.append(row)
        senses.append(_LE)
        rhs.append(cap)
    cstd = [conv(lp.objective[j]) * s for (j, s) in cols]

    m = len(rows)
    for i in range(m):
        if rhs[i] < 0:
            rows[i] = [-a for a in rows[i]]
            rhs[i] = -rhs[i]
            senses[i] = {_LE: _GE, _GE: _LE, _EQ: _EQ}[senses[i]]

    n_slack = sum(1 for s in senses if s != _EQ)
    n_art = sum(1 for s in senses if s != _LE)
    ncol = nstd + n_slack + n_art
    dtype = object if exact else float
    T = np.empty((m, ncol + 1), dtype=dtype)
    T[:, :] = zero
    basis = [0] * m
    art_cols = []
    si, ai = nstd, nstd + n_slack
    for i in range(m):
        T[i, :nstd] = rows[i]
        T[i, -1] = rhs[i]
        if senses[i] == _LE:
            T[i, si] = one
            basis[i] = si
            si += 1
        elif senses[i] == _GE:
            T[i, si] = -one
            si += 1
            T[i, ai] = one
            basis[i] = ai
            art_cols.append(ai)
            ai += 1
        else:
            T[i, ai] = one
            basis[i] = ai
            art_cols.append(ai)
            ai += 1
    art = set(art_cols)
    max_iter = 50 * (m + ncol) + 1000

    # Phase 1: minimize the sum of artificials, i.e. maximize its negative.
    if art_cols:
        cost = np.empty(ncol, dtype=dtype)
        cost[:] = zero
        for a in art_cols:
            cost[a] = -one
        status = _run_simplex(T, basis, cost, set(), tol, max_iter)
        if status == "unbounded":
            raise NumericalFailure("phase 1 reported unbounded")
        infeas = sum((T[i, -1] for i in range(m) if basis[i] in art), zero)
        if infeas > (tol * 1e3 if not exact else 0):
            return LPSolution("infeasible", np.full(k, np.nan), np.nan, np.inf, "exact" if exact else "simplex")
        # Drive remaining artificials out of the basis, dropping redundant rows.
        keep = []
        for i in range(m):
            if basis[i] in art:
                piv = next((c for c in range(nstd + n_slack) if abs(T[i, c]) > tol), None)
                if piv is None:
                    continue
                _pivot(T, i, piv)
                basis[i] = piv
            keep.append(i)
        T = T[keep]
        basis = [basis[i] for i in keep]
        m = len(keep)

    cost = np.empty(ncol, dtype=dtype)
    cost[:] = zero
    cost[:nstd] = cstd
    status = _run_simplex(T, basis, cost, art, tol, max_iter)
    name = "exact" if exact else "simplex"
    if status == "unbounded":
        return LPSolution("unbounded", np.full(k, np.nan), np.inf, np.inf, name)

    w = [zero] * ncol
    for i in range(m):
        w[basis[i]] = T[i, -1]
    vals = list(shift)
    for t, (j, s) in enumerate(cols):
        vals[j] = vals[j] + s * w[t]
    obj = sum((conv(lp.objective[j]) * vals[j] for j in range(k)), zero)
    x = np.array([float(v) for v in vals])
    return LPSolution(
        "optimal", x, float(obj), lp.residual(x), name, tuple(vals) if exact else None
    )


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] = T[r] / T[r, c]
    col = T[:, c].copy()
    col[r] = 0
    T -= np.outer(col, T[r])


def _run_simplex(T, basis, cost, banned, tol, max_iter) -> str:
    """Maximize ``cost @ w`` on the tableau in place using Bland's rule."""
    m = T.shape[0]
    ncol = T.shape[1] - 1
    for _ in range(max_iter):
        cb = np.array([cost[b] for b in basis], dtype=T.dtype)
        # reduced profit of column j: cost_j - c_B^T column_j
        red = cost - (cb @ T[:, :ncol] if m else 0)
        enter = -1
        for j in range(ncol):
            if j in banned:
                continue
            if red[j] > tol:
                enter = j
                break
        if enter < 0:
            return "optimal"
        best = None
        leave = -1
        for i in range(m):
            a = T[i, enter]
            if a > tol:
                ratio = T[i, -1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best = ratio
                    leave = i
        if leave < 0:
            return "unbounded"
        _pivot(T, leave, enter)
        basis[leave] = enter
    raise NumericalFailure("simplex iteration limit reached (cycling suspected)")


def stack_rows(blocks: Sequence[tuple[sparse.spmatrix, str, np.ndarray]]):
    """Concatenate ``(matrix, relation, rhs)`` blocks into ``(A, senses, rhs)``."""
    mats, senses, rhs = [], [], []
    for mat, rel, r in blocks:
        mats.append(sparse.csr_matrix(mat))
        r = np.asarray(r, dtype=float).reshape(-1)
        senses += [rel] * len(r)
        rhs.append(r)
    return sparse.vstack(mats).tocsr(), tuple(senses), np.concatenate(rhs)
