"""Price of anarchy: certify a fixed mechanism, or design the PoA-optimal one.

A mechanism F has PoA at most 1/rho whenever some nu >= 0 satisfies, for
every basis and every triplet (x, y, z),

    b(y) y - rho b(x) x + nu [(x-z) F(x) - (y-z) F(x+1)] >= 0.

Designing F turns nu into a free scale (fix nu = 1) and makes the program an
LP in (F, rho).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import _rows
from .errors import ConfigError, NumericalFailure, PoaInfinite
from .lp import LinearProgram, solve_lp
from .model import GameClass, Mechanism, index_array, marginal_cost_mechanism

AGREE_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class PoaCertificate:
    """``poa`` is certified with one multiplier ``nu`` shared by all bases.

    ``per_basis_rho[j]`` is the best ratio for basis j alone, so
    ``poa >= max_j 1/per_basis_rho[j]`` with equality whenever the per-basis
    multipliers coincide (as they do for normalized optimal mechanisms).
    """

    cls: GameClass
    per_basis_rho: tuple[float, ...]
    poa: float
    mechanism: Mechanism
    nu: float
    residual: float = 0.0

    @property
    def rho(self) -> float:
        return 1.0 / self.poa

    def to_json(self) -> dict:
        return {
            "basis": self.cls.labels(),
            "n": self.cls.n,
            "rho": list(self.per_basis_rho),
            "poa": self.poa,
            "nu": self.nu,
            "F": [f.tolist() for f in self.mechanism.per_basis_F],
            "residual": self.residual,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _fixed_rows(cls: GameClass, mech: Mechanism, T: np.ndarray):
    """Per-basis arrays (a, g, w) = (b(y)y, G, b(x)x)."""
    out = []
    x, y, _ = _rows.split(T)
    for j, b in enumerate(cls.bases):
        bw = b.weighted()
        out.append((bw[y], _rows.perturbation_values(mech.padded(j), T), bw[x]))
    return out


def _ratio_lp(blocks, backend: str):
    """maximize rho over (rho, nu >= 0) subject to ``rho w - nu g <= a`` for all rows."""
    a = np.concatenate([blk[0] for blk in blocks])
    g = np.concatenate([blk[1] for blk in blocks])
    w = np.concatenate([blk[2] for blk in blocks])
    A = sparse.csr_matrix(np.stack([w, -g], axis=1))
    lp = LinearProgram(np.array([1.0, 0.0]), A, ("<=",) * len(a), a, np.array([-np.inf, 0.0]), np.array([np.inf, np.inf]))
    sol = solve_lp(lp, backend=backend)
    if sol.status == "infeasible":
        return -np.inf, np.nan, sol.max_residual
    if sol.status == "unbounded":
        raise NumericalFailure("ratio LP unbounded: constraint rows are mis-generated")
    return float(sol.values[0]), float(sol.values[1]), sol.max_residual


def _certify(cls, mech, blocks, backend):
    rho_cf, nu_cf = _rows.max_concave_ratio(
        np.concatenate([b[0] for b in blocks]),
        np.concatenate([b[1] for b in blocks]),
        np.concatenate([b[2] for b in blocks]),
    )
    rho_lp, nu_lp, resid = _ratio_lp(blocks, backend)
    if not (np.isfinite(rho_cf) and np.isfinite(rho_lp)):
        if rho_cf == -np.inf and rho_lp == -np.inf:
            raise PoaInfinite("no multiplier nu >= 0 satisfies the load-0 rows")
        raise NumericalFailure(f"ratio scan ({rho_cf}) and LP ({rho_lp}) disagree on feasibility")
    if abs(rho_cf - rho_lp) > AGREE_TOL:
        raise NumericalFailure(f"ratio scan {rho_cf:.12g} and LP {rho_lp:.12g} disagree", abs(rho_cf - rho_lp))
    rho = max(rho_cf, rho_lp)
    if rho <= 1e-12:
        raise PoaInfinite(f"best certificate has rho = {rho:.3g} <= 0")
    per = []
    for blk in blocks:
        r, _ = _rows.max_concave_ratio(*blk)
        per.append(float(min(r, 1.0)))
    nu = nu_cf if rho_cf >= rho_lp else nu_lp
    return PoaCertificate(cls, tuple(per), 1.0 / min(rho, 1.0), mech, float(nu), float(resid))


def poa_of_mechanism(cls: GameClass, mech: Mechanism, backend: str = "highs") -> PoaCertificate:
    """PoA of a fixed mechanism, by closed-form ratio scan and by LP; both must agree."""
    mech.check(cls)
    T = index_array(cls.n, "extreme")
    return _certify(cls, mech, _fixed_rows(cls, mech, T), backend)


def _optimal_lp(b, n: int, T: np.ndarray):
    """Variables F(1..n) then rho; rows ``rho b(x)x - G <= b(y)y``."""
    x, y, _ = _rows.split(T)
    ncols = n + 1
    bw = b.weighted()
    A = _rows.perturbation_block(T, n, ncols, 0, scale=-1.0) + _rows.column(bw[x], ncols, n)
    c = np.zeros(ncols)
    c[n] = 1.0
    lo = np.full(ncols, -np.inf)
    hi = np.full(ncols, np.inf)
    return LinearProgram(c, A, ("<=",) * len(T), bw[y], lo, hi)


def _nondecreasing(F: np.ndarray, tol: float = 1e-7) -> bool:
    scale = max(1.0, float(np.max(np.abs(F))))
    return bool(np.all(np.diff(F) >= -tol * scale))


def _design(cls: GameClass, build, backend: str):
    Fs, rhos = [], []
    for b in cls.bases:
        lp = build(b)
        sol = solve_lp(lp, backend=backend)
        if not sol.optimal:
            raise NumericalFailure(f"optimal-mechanism LP for {b.label()} is {sol.status}")
        F = sol.values[: cls.n].copy()
        rho = float(sol.values[cls.n])
        if F[0] > 0 and b.values[1] > 0:
            F *= b.values[1] / F[0]
        if b.convex and b.nondecreasing and not _nondecreasing(F):
            raise NumericalFailure(f"optimal F for convex nondecreasing {b.label()} is not nondecreasing")
        Fs.append(F)
        rhos.append(min(rho, 1.0))
    return Mechanism(tuple(Fs)), rhos


def optimal_poa_mechanism(cls: GameClass, backend: str = "highs") -> PoaCertificate:
    """Per basis, maximize rho over (F, rho); F is rescaled so that F(1) = b(1)."""
    T = index_array(cls.n, "extreme")
    mech, rhos = _design(cls, lambda b: _optimal_lp(b, cls.n, T), backend)
    cert = poa_of_mechanism(cls, mech, backend)
    best = max(1.0 / r for r in rhos)
    if abs(cert.poa - best) > AGREE_TOL * best:
        raise NumericalFailure(f"designed mechanism re-certifies at {cert.poa:.12g}, design LP gave {best:.12g}")
    return PoaCertificate(cls, tuple(rhos), best, mech, cert.nu, cert.residual)


def _relaxed_triplets(n: int) -> np.ndarray:
    x, y = np.meshgrid(np.arange(n + 1), np.arange(1, n + 1), indexing="ij")
    x, y = x.ravel(), y.ravel()
    x = np.append(x, n)
    y = np.append(y, 0)
    z = np.maximum(0, x + y - n)
    T = np.stack([x, y, z], axis=1)
    return T[np.lexsort((T[:, 1], T[:, 0]))]


def optimal_poa_mechanism_relaxed(cls: GameClass, backend: str = "highs") -> PoaCertificate:
    """Relaxed program over pairs, coefficients ``min(x, n-y)`` and ``min(y, n-x)``.

    These are the z = max(0, x+y-n) rows, less the rows (x, 0) with x < n. For
    convex nondecreasing bases the relaxation is exact.
    """
    for b in cls.bases:
        if not (b.convex and b.nondecreasing):
            raise ConfigError(f"relaxed program needs convex nondecreasing bases, got {b.label()}")
    T = _relaxed_triplets(cls.n)
    mech, rhos = _design(cls, lambda b: _optimal_lp(b, cls.n, T), backend)
    best = max(1.0 / r for r in rhos)
    return PoaCertificate(cls, tuple(rhos), best, mech, 1.0)


def marginal_cost_rows(b, n: int):
    """(a, g, w) rows for the marginal-cost mechanism, with b(-1)=b(0)=b(n+1)=0."""
    x, y = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    x, y = x.ravel(), y.ravel()
    keep = x + y > 0
    x, y = x[keep], y[keep]
    vals = np.zeros(n + 4)
    vals[2 : n + 2] = b.values[1 : n + 1]

    def bb(k):
        # index shift by one so that load -1 maps to slot 0
        return vals[k + 1]

    low = x + y <= n
    g = np.where(
        low,
        (x * x + x * y) * bb(x) - x * (x - 1) * bb(x - 1) - y * (x + 1) * bb(x + 1),
        x * bb(x) * (2 * n - x - y) + (x - 1) * bb(x - 1) * (y - n) + (x + 1) * bb(x + 1) * (x - n),
    )
    return bb(y) * y, g.astype(float), bb(x) * x


def marginal_cost_poa(cls: GameClass, backend: str = "highs") -> PoaCertificate:
    """PoA of the marginal-cost mechanism from its closed-form two-family rows."""
    for b in cls.bases:
        if not (b.positive and b.convex):
            raise ConfigError(f"marginal-cost PoA needs positive convex bases, got {b.label()}")
    mech = marginal_cost_mechanism(cls)
    blocks = [marginal_cost_rows(b, cls.n) for b in cls.bases]
    return _certify(cls, mech, blocks, backend)
