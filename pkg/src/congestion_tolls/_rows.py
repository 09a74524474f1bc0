"""Constraint-row algebra shared by the PoA and PoS programs.

For a triplet (x, y, z) the perturbation term is
``G = (x-z) F(x) - (y-z) F(x+1)`` and the potential term is
``K = sum_{k<=x} F(k) - sum_{k<=y} F(k)``.
Both are linear in F, so they are emitted either as numbers (F fixed) or as
sparse coefficient blocks (F a decision variable).
"""

from __future__ import annotations

import numpy as np
from scipy import sparse


def split(T: np.ndarray):
    return T[:, 0], T[:, 1], T[:, 2]


def perturbation_values(Fp: np.ndarray, T: np.ndarray) -> np.ndarray:
    """G for every row, with ``Fp`` the padded table on loads 0..n+1."""
    x, y, z = split(T)
    return (x - z) * Fp[x] - (y - z) * Fp[x + 1]


def potential_values(Fp: np.ndarray, T: np.ndarray) -> np.ndarray:
    x, y, _ = split(T)
    cum = np.cumsum(Fp)
    return cum[x] - cum[y]


def perturbation_block(T: np.ndarray, n: int, ncols: int, offset: int, scale: float = 1.0) -> sparse.csr_matrix:
    """Coefficients of G on variables ``F(k)`` stored at column ``offset + k - 1``."""
    x, y, z = split(T)
    rows = np.arange(len(T))
    a = (x >= 1) & (x - z != 0)
    b = (x + 1 <= n) & (y - z != 0)
    I = np.concatenate([rows[a], rows[b]])
    J = np.concatenate([offset + x[a] - 1, offset + x[b]])
    V = np.concatenate([scale * (x - z)[a], -scale * (y - z)[b]]).astype(float)
    return sparse.csr_matrix((V, (I, J)), shape=(len(T), ncols))


def potential_block(T: np.ndarray, ncols: int, offset: int, scale: float = 1.0) -> sparse.csr_matrix:
    """Coefficients of K: +1 on F(k) for y < k <= x, -1 for x < k <= y."""
    x, y, _ = split(T)
    lo = np.minimum(x, y)
    length = np.abs(x - y)
    rows = np.repeat(np.arange(len(T)), length)
    start = np.repeat(lo, length)
    step = np.arange(length.sum()) - np.repeat(np.cumsum(length) - length, length)
    k = start + step + 1
    sign = np.repeat(np.where(x > y, 1.0, -1.0), length)
    return sparse.csr_matrix((scale * sign, (rows, offset + k - 1)), shape=(len(T), ncols))


def column(values: np.ndarray, ncols: int, col: int) -> sparse.csr_matrix:
    values = np.asarray(values, dtype=float)
    rows = np.nonzero(values)[0]
    return sparse.csr_matrix((values[rows], (rows, np.full(len(rows), col))), shape=(len(values), ncols))


def max_concave_ratio(a, g, w, nu_lo: float = 0.0, nu_hi: float = np.inf):
    """Maximize ``phi(nu) = min_r (a_r + nu g_r) / w_r`` over ``nu in [nu_lo, nu_hi]``.

    Rows with ``w_r = 0`` are not ratios; they restrict nu through
    ``a_r + nu g_r >= 0``. ``phi`` is concave and piecewise linear, so the
    maximizer is located by bisection on the sign of its right derivative.
    Returns ``(phi*, nu*)``; ``phi* = -inf`` when the nu-interval is empty.
    """
    a = np.asarray(a, dtype=float)
    g = np.asarray(g, dtype=float)
    w = np.asarray(w, dtype=float)
    lo, hi = max(0.0, nu_lo), nu_hi
    feas = w == 0
    if feas.any():
        fa, fg = a[feas], g[feas]
        pos, neg, flat = fg > 0, fg < 0, fg == 0
        if np.any(fa[flat] < 0):
            return -np.inf, np.nan
        if pos.any():
            lo = max(lo, float(np.max(-fa[pos] / fg[pos])))
        if neg.any():
            hi = min(hi, float(np.min(fa[neg] / -fg[neg])))
    if lo > hi * (1 + 1e-12) + 1e-300:
        return -np.inf, np.nan
    hi = max(hi, lo)
    r = ~feas
    ra, rs = a[r] / w[r], g[r] / w[r]
    if len(ra) == 0:
        return np.inf, lo

    def phi(nu):
        return float(np.min(ra + nu * rs))

    def right_slope(nu):
        vals = ra + nu * rs
        m = vals.min()
        act = vals <= m + 1e-12 * max(1.0, abs(m))
        return float(np.min(rs[act]))

    if right_slope(lo) <= 0:
        return phi(lo), lo
    if not np.isfinite(hi):
        hi = max(1.0, 2 * lo)
        while right_slope(hi) > 0:
            hi *= 2
            if hi > 1e15:
                return np.inf, np.inf
    elif right_slope(hi) > 0:
        return phi(hi), hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if right_slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    # The kink lies in [lo, hi]; evaluate both ends and keep the better one.
    vl, vh = phi(lo), phi(hi)
    return (vl, lo) if vl >= vh else (vh, hi)
