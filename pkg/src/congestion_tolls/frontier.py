"""Bounds on the PoA/PoS Pareto frontier.

Upper bound: design F so that PoA(F) <= alpha while a smoothness certificate
built on the Rosenthal potential gives the best PoS. With the smoothness
multiplier of F fixed to cos(theta) and the potential weight to sin(theta),
every slice theta is an LP; ``kappa = tan(theta)`` and theta = pi/2 is the
pure-potential endpoint (kappa = inf) reached by the marginal-cost mechanism.

Lower bound: among mechanisms meeting PoA <= alpha, the one with the largest
total perturbed cost makes a dominance-solvable family of games as cheap as
possible to deviate in; the best equilibrium of those games bounds PoS from
below.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import _rows
from .errors import BoundVacuous, ConfigError, InfeasibleAlpha, NumericalFailure, TollError
from .lp import LinearProgram, solve_lp, stack_rows
from .model import GameClass, Mechanism, index_array
from .poa import AGREE_TOL, optimal_poa_mechanism

ALPHA_MARGIN = 1e-9
# alphas this close to the minimum PoA are treated as the endpoint
ENDPOINT_REL = 1e-6


@dataclass(frozen=True)
class KappaSearch:
    """Grid over kappa (with 0 and inf) then golden-section refinement in theta."""

    exponents: tuple[int, ...] = tuple(range(-10, 5))
    include_zero: bool = True
    include_infinity: bool = True
    max_evals: int = 40
    tol: float = 1e-4

    def thetas(self) -> list[float]:
        ks = ([0.0] if self.include_zero else []) + [2.0**k for k in self.exponents]
        th = [math.atan(k) for k in ks]
        if self.include_infinity:
            th.append(math.pi / 2)
        return sorted(set(th))


def theta_to_kappa(theta: float) -> float:
    if theta >= math.pi / 2 - 1e-15:
        return math.inf
    return math.tan(theta)


def golden_max(f, thetas: list[float], max_evals: int, tol: float):
    """Grid search then golden-section on the bracket around the best grid point.

    ``f`` returns a score or None for an invalid point. Returns (score, theta, payload).
    """
    evals = []
    for th in thetas:
        val = f(th)
        evals.append((th, val))
    scored = [(v[0], th, v[1]) for th, v in evals if v is not None]
    if not scored:
        return None
    best = max(scored, key=lambda s: s[0])
    idx = thetas.index(best[1])
    lo = thetas[max(idx - 1, 0)]
    hi = thetas[min(idx + 1, len(thetas) - 1)]
    budget = max_evals - len(thetas)
    invphi = (math.sqrt(5) - 1) / 2

    def score(th):
        v = f(th)
        return (-math.inf, None) if v is None else v

    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = score(c), score(d)
    budget -= 2
    for cand in ((fc[0], c, fc[1]), (fd[0], d, fd[1])):
        if cand[2] is not None and cand[0] > best[0]:
            best = cand
    while budget > 0 and (b - a) > tol:
        if fc[0] >= fd[0]:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = score(c)
            new = (fc[0], c, fc[1])
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = score(d)
            new = (fd[0], d, fd[1])
        budget -= 1
        if new[2] is not None and new[0] > best[0]:
            best = new
    return best


@dataclass(frozen=True, eq=False)
class BoundCertificate:
    """Output of the upper or lower PoS bound at one PoA level ``alpha``.

    Smoothness parameters follow from ``gamma = (1 - mu)/lambda``,
    ``nu = 1/lambda`` and ``kappa = zeta/lambda``.
    """

    side: str
    alpha: float
    gamma: float
    rho: float
    nu: float
    kappa: float
    mechanism: Mechanism | None = None
    theta: float = math.nan
    argmin: tuple[int, int] | None = None
    basis_index: int | None = None
    residual: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def pos(self) -> float:
        return 1.0 / self.gamma

    @property
    def poa(self) -> float:
        return 1.0 / self.rho if self.rho > 0 else math.inf

    def smoothness(self) -> dict:
        lam = 1.0 / self.nu if self.nu > 0 else math.inf
        return {"lambda": lam, "mu": 1.0 - self.gamma * lam, "zeta": self.kappa * lam}

    def to_json(self) -> dict:
        out = {
            "side": self.side,
            "alpha": self.alpha,
            "pos": self.pos,
            "gamma": self.gamma,
            "rho": self.rho,
            "nu": self.nu,
            "kappa": _jsonable(self.kappa),
            "theta": _jsonable(self.theta),
            "residual": self.residual,
        }
        if self.argmin is not None:
            out["argmin_uv"] = list(self.argmin)
            out["basis_index"] = self.basis_index
        if self.mechanism is not None:
            out["F"] = [f.tolist() for f in self.mechanism.per_basis_F]
        out.update(self.extra)
        return out


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


# --- fixed-mechanism smoothness ---------------------------------------------


def _smooth_rows(cls: GameClass, mech: Mechanism, T: np.ndarray, kappa: float):
    """Per-basis arrays (a, g, w) with a = b(y)y + kappa K, g = G, w = b(x)x."""
    x, y, _ = _rows.split(T)
    out = []
    for j, b in enumerate(cls.bases):
        Fp = mech.padded(j)
        bw = b.weighted()
        out.append((bw[y] + kappa * _rows.potential_values(Fp, T), _rows.perturbation_values(Fp, T), bw[x]))
    return out


def smoothness_gamma(cls: GameClass, mech: Mechanism, kappa: float, nu: float | None = None, backend: str = "highs"):
    """Best gamma of the smoothness rows for fixed F and kappa.

    ``nu=None`` optimizes the perturbation multiplier over nu >= 0 (the
    mechanism is only defined up to scale, so a fixed F needs this freedom);
    a number pins it. Closed form and LP are both run and must agree.
    Returns (gamma, nu).
    """
    if kappa < 0:
        raise ConfigError("kappa must be >= 0")
    mech.check(cls)
    T = index_array(cls.n, "extreme")
    blocks = _smooth_rows(cls, mech, T, kappa)
    a = np.concatenate([b[0] for b in blocks])
    g = np.concatenate([b[1] for b in blocks])
    w = np.concatenate([b[2] for b in blocks])
    if nu is None:
        g_cf, nu_cf = _rows.max_concave_ratio(a, g, w)
        A = sparse.csr_matrix(np.stack([w, -g], axis=1))
        lp = LinearProgram(np.array([1.0, 0.0]), A, ("<=",) * len(a), a, np.array([-np.inf, 0.0]), np.array([np.inf, np.inf]))
    else:
        a = a + nu * g
        g_cf, nu_cf = _rows.max_concave_ratio(a, np.zeros_like(g), w)
        nu_cf = nu
        lp = LinearProgram(np.array([1.0]), sparse.csr_matrix(w[:, None]), ("<=",) * len(a), a, np.array([-np.inf]), np.array([np.inf]))
    sol = solve_lp(lp, backend=backend)
    g_lp = float(sol.values[0]) if sol.optimal else -math.inf
    if math.isfinite(g_cf) != math.isfinite(g_lp) or (math.isfinite(g_cf) and abs(g_cf - g_lp) > AGREE_TOL):
        raise NumericalFailure(f"smoothness ratio scan {g_cf} and LP {g_lp} disagree")
    return max(g_cf, g_lp), float(nu_cf if nu is None or g_cf >= g_lp else nu)


def smoothness_pos_bound(cls: GameClass, mech: Mechanism, kappa: float, nu: float | None = None, backend: str = "highs") -> float:
    """PoS <= 1/gamma from the smoothness certificate at potential weight kappa."""
    gamma, _ = smoothness_gamma(cls, mech, kappa, nu, backend)
    if not gamma > 0:
        raise BoundVacuous(f"no smoothness certificate with gamma > 0 at kappa={kappa}")
    return 1.0 / min(gamma, 1.0)


def best_smoothness_pos_bound(cls: GameClass, mech: Mechanism, backend: str = "highs"):
    """Jointly optimal (gamma, nu, kappa) for a fixed mechanism; returns (pos, kappa, nu)."""
    mech.check(cls)
    T = index_array(cls.n, "extreme")
    blocks = _smooth_rows(cls, mech, T, 0.0)
    x, y, _ = _rows.split(T)
    mats, rhs = [], []
    for j, b in enumerate(cls.bases):
        K = _rows.potential_values(mech.padded(j), T)
        a, g, w = blocks[j]
        mats.append(np.stack([w, -g, -K], axis=1))
        rhs.append(a)
    A = sparse.csr_matrix(np.vstack(mats))
    r = np.concatenate(rhs)
    lp = LinearProgram(np.array([1.0, 0.0, 0.0]), A, ("<=",) * len(r), r, np.array([-np.inf, 0.0, 0.0]), np.full(3, np.inf))
    sol = solve_lp(lp, backend=backend)
    if not sol.optimal or sol.values[0] <= 0:
        raise BoundVacuous("no smoothness certificate with gamma > 0 for any kappa")
    gamma, nu, kappa = (float(v) for v in sol.values)
    return 1.0 / min(gamma, 1.0), kappa, nu


# --- minimum PoA cache ------------------------------------------------------

_MIN_POA: dict = {}


def min_achievable_poa(cls: GameClass, backend: str = "highs") -> float:
    key = (cls.n, tuple(tuple(b.values) for b in cls.bases), backend)
    if key not in _MIN_POA:
        _MIN_POA[key] = optimal_poa_mechanism(cls, backend).poa
    return _MIN_POA[key]


def _effective_alpha(cls: GameClass, alpha: float, backend: str) -> tuple[float, float]:
    min_poa = min_achievable_poa(cls, backend)
    if alpha < (1.0 - ALPHA_MARGIN) * min_poa:
        raise InfeasibleAlpha(alpha, min_poa)
    return max(alpha, min_poa), min_poa


# --- upper bound ------------------------------------------------------------


class _UpperProgram:
    """Rows of the upper-bound LP that do not depend on theta, built once.

    Columns: F_j(1..n) per basis, then cumulative sums P_j(1..n) with
    P_j(k) = P_j(k-1) + F_j(k), then s, t, gamma. Writing the potential term
    as P(x) - P(y) keeps every row at a handful of nonzeros.
    """

    def __init__(self, cls: GameClass):
        self.cls = cls
        n, m = cls.n, cls.m
        T = index_array(n, "extreme")
        self.T = T
        x, y, _ = _rows.split(T)
        self.ncols = 2 * m * n + 3
        self.S, self.Tt, self.G = 2 * m * n, 2 * m * n + 1, 2 * m * n + 2
        self.poa_blocks, self.pert, self.pot, self.smooth_fixed, self.smooth_rhs = [], [], [], [], []
        cum = []
        for j, b in enumerate(cls.bases):
            bw = b.weighted()
            off, poff = j * n, m * n + j * n
            P = _rows.perturbation_block(T, n, self.ncols, off)
            # PoA rows: s b(y)y - t b(x)x + G >= 0
            self.poa_blocks.append(P + _rows.column(bw[y], self.ncols, self.S) - _rows.column(bw[x], self.ncols, self.Tt))
            self.pert.append(P)
            self.pot.append(_cumulative_difference(x, y, self.ncols, poff))
            # smoothness rows: -gamma b(x)x + cos G + sin K >= -b(y)y
            self.smooth_fixed.append(-_rows.column(bw[x], self.ncols, self.G))
            self.smooth_rhs.append(-bw[y])
            k = np.arange(1, n + 1)
            I = np.concatenate([k - 1, k[1:] - 1, k - 1])
            J = np.concatenate([poff + k - 1, poff + k[1:] - 2, off + k - 1])
            V = np.concatenate([np.ones(n), -np.ones(n - 1), -np.ones(n)])
            cum.append(sparse.csr_matrix((V, (I, J)), shape=(n, self.ncols)))
        self.cum = sparse.vstack(cum).tocsr()

    def build(self, alpha: float, theta: float) -> LinearProgram:
        cs, sn = math.cos(theta), math.sin(theta)
        if theta >= math.pi / 2 - 1e-15:
            cs, sn = 0.0, 1.0
        blocks = []
        for j in range(self.cls.m):
            blocks.append((self.poa_blocks[j], ">=", np.zeros(self.poa_blocks[j].shape[0])))
            mat = self.smooth_fixed[j] + cs * self.pert[j] + sn * self.pot[j]
            blocks.append((mat, ">=", self.smooth_rhs[j]))
        blocks.append((self.cum, "==", np.zeros(self.cum.shape[0])))
        row = np.zeros((1, self.ncols))
        row[0, self.Tt] = 1.0
        row[0, self.S] = -1.0 / alpha
        blocks.append((row, ">=", np.zeros(1)))
        A, senses, rhs = stack_rows(blocks)
        c = np.zeros(self.ncols)
        c[self.G] = 1.0
        lo = np.full(self.ncols, -np.inf)
        lo[self.S] = 0.0
        return LinearProgram(c, A, senses, rhs, lo, np.full(self.ncols, np.inf))

    def solve(self, alpha: float, theta: float, backend: str):
        try:
            sol = solve_lp(self.build(alpha, theta), backend=backend)
        except NumericalFailure:
            # degenerate slice (typically alpha exactly at the minimum PoA)
            return None
        if not sol.optimal:
            return None
        s, t, gamma = sol.values[self.S], sol.values[self.Tt], sol.values[self.G]
        if s <= 1e-12 or t <= 0:
            return None
        return float(gamma), sol


def _cumulative_difference(x, y, ncols: int, poff: int) -> sparse.csr_matrix:
    """Coefficients of P(x) - P(y) with P(0) = 0 and P(k) at column poff + k - 1."""
    rows = np.arange(len(x))
    a, b = x >= 1, y >= 1
    I = np.concatenate([rows[a], rows[b]])
    J = np.concatenate([poff + x[a] - 1, poff + y[b] - 1])
    V = np.concatenate([np.ones(a.sum()), -np.ones(b.sum())])
    return sparse.csr_matrix((V, (I, J)), shape=(len(x), ncols))


def pos_upper_bound(cls: GameClass, alpha: float, search: KappaSearch | None = None, backend: str = "highs") -> BoundCertificate:
    """Mechanism with PoA <= alpha and the smallest certified PoS over the theta search."""
    search = search or KappaSearch()
    alpha_eff, min_poa = _effective_alpha(cls, alpha, backend)
    if alpha_eff <= min_poa * (1.0 + ENDPOINT_REL):
        # only the PoA-optimal mechanism is feasible here
        return _optimal_mechanism_bound(cls, alpha, backend)
    prog = _UpperProgram(cls)
    result = None
    for bump in (0.0, 1e-9, 1e-8, 1e-7):
        a = alpha_eff * (1.0 + bump)
        result = golden_max(lambda th: prog.solve(a, th, backend), search.thetas(), search.max_evals, search.tol)
        if result is not None:
            alpha_eff = a
            break
    if result is None:
        # every slice failed numerically; the PoA-optimal mechanism is still feasible
        return _optimal_mechanism_bound(cls, alpha, backend)
    gamma, theta, sol = result
    if gamma <= 0:
        raise BoundVacuous(f"upper-bound program gives gamma={gamma:.3g} at alpha={alpha:.6f}")
    n, m = cls.n, cls.m
    v = sol.values
    mech = Mechanism(tuple(v[j * n : (j + 1) * n].copy() for j in range(m)))
    s, t = v[prog.S], v[prog.Tt]
    # the smoothness rows hold with multiplier cos(theta) on this F
    return BoundCertificate(
        side="upper",
        alpha=float(alpha),
        gamma=float(min(gamma, 1.0)),
        rho=float(t / s),
        nu=float(1.0 / s),
        kappa=theta_to_kappa(theta),
        mechanism=mech,
        theta=float(theta),
        residual=sol.max_residual,
        extra={"smooth_nu": math.cos(theta) if theta < math.pi / 2 - 1e-15 else 0.0,
               "smooth_kappa": math.sin(theta)},
    )


def _optimal_mechanism_bound(cls: GameClass, alpha: float, backend: str) -> BoundCertificate:
    """Upper bound certified by the PoA-optimal mechanism, which has PoA <= alpha for any feasible alpha."""
    cert = optimal_poa_mechanism(cls, backend)
    pos, kappa, nu = best_smoothness_pos_bound(cls, cert.mechanism, backend)
    return BoundCertificate(
        side="upper",
        alpha=float(alpha),
        gamma=1.0 / pos,
        rho=1.0 / cert.poa,
        nu=float(cert.nu),
        kappa=float(kappa),
        mechanism=cert.mechanism,
        theta=math.atan(kappa),
        residual=cert.residual,
        extra={"source": "poa-optimal mechanism", "smooth_nu": float(nu), "smooth_kappa": float(kappa)},
    )


# --- lower bound ------------------------------------------------------------


def _lower_lp(b, n: int, T: np.ndarray, alpha: float) -> LinearProgram:
    """maximize sum F over (F, s, t) with F(1) = 1, t >= s/alpha and the PoA rows."""
    x, y, _ = _rows.split(T)
    ncols = n + 2
    S, Tt = n, n + 1
    bw = b.weighted()
    P = _rows.perturbation_block(T, n, ncols, 0) + _rows.column(bw[y], ncols, S) - _rows.column(bw[x], ncols, Tt)
    link = np.zeros((1, ncols))
    link[0, Tt] = 1.0
    link[0, S] = -1.0 / alpha
    norm = np.zeros((1, ncols))
    norm[0, 0] = 1.0
    A, senses, rhs = stack_rows([(P, ">=", np.zeros(len(T))), (link, ">=", np.zeros(1)), (norm, "==", np.ones(1))])
    c = np.zeros(ncols)
    c[:n] = 1.0
    lo = np.full(ncols, -np.inf)
    lo[S] = 0.0
    return LinearProgram(c, A, senses, rhs, lo, np.full(ncols, np.inf))


def lower_gamma(b, F: np.ndarray, n: int):
    """min over 0 <= v < u <= n of [b(v)v + b(1) sum_k max_{v+k<=x<=u} F(x)] / [b(u)u].

    Returns (gamma, (u, v)); loads with b(u)u = 0 are skipped.
    """
    bw = b.weighted()
    Fp = np.concatenate(([0.0], np.asarray(F, dtype=float)))
    best, arg = math.inf, None
    for u in range(1, n + 1):
        den = bw[u]
        if den <= 0:
            continue
        # suffix maxima M(i) = max_{i<=x<=u} F(x) for i = 1..u
        M = np.maximum.accumulate(Fp[1 : u + 1][::-1])[::-1]
        # S(v) = sum_{i=v+1}^{u} M(i) for v = 0..u-1
        tail = np.cumsum(M[::-1])[::-1]
        vals = (bw[:u] + b.values[1] * tail) / den
        v = int(np.argmin(vals))
        if vals[v] < best:
            best, arg = float(vals[v]), (u, v)
    return best, arg


def pos_lower_bound(cls: GameClass, alpha: float, backend: str = "highs") -> BoundCertificate:
    """Best-equilibrium lower bound on PoS for any local mechanism with PoA <= alpha."""
    alpha_eff, min_poa = _effective_alpha(cls, alpha, backend)
    n = cls.n
    T = index_array(n, "extreme")
    worst = None
    Fs = []
    # At the minimum PoA the feasible F of a binding basis is the unique
    # PoA-optimal one. The LP is degenerate there, and the smallest relaxation
    # of alpha already frees F at high loads, so that F is used directly.
    pinned = None
    if alpha_eff <= min_poa * (1.0 + 1e-12):
        pinned = optimal_poa_mechanism(cls, backend)
    for j, b in enumerate(cls.bases):
        if b.values[1] <= 0:
            raise ConfigError(f"lower bound normalizes F(1) = 1 and needs b(1) > 0, got {b.label()}")
        if pinned is not None and 1.0 / pinned.per_basis_rho[j] >= alpha_eff * (1.0 - 1e-9):
            F = pinned.mechanism.per_basis_F[j] / pinned.mechanism.per_basis_F[j][0]
            Fs.append(F)
            g, arg = lower_gamma(b, F, n)
            g = min(g, 1.0)
            if worst is None or g < worst[0]:
                worst = (g, arg, j, 1.0 / pinned.nu, pinned.per_basis_rho[j] / pinned.nu, pinned.residual)
            continue
        sol = None
        for bump in (0.0, 1e-9, 1e-8, 1e-7):
            try:
                sol = solve_lp(_lower_lp(b, n, T, alpha_eff * (1.0 + bump)), backend=backend)
            except NumericalFailure:
                continue
            if sol.optimal:
                break
        if sol is None or not sol.optimal:
            status = "numerically unstable" if sol is None else sol.status
            raise NumericalFailure(f"lower-bound LP is {status} for {b.label()} at alpha={alpha:.6f}")
        F = sol.values[:n].copy()
        Fs.append(F)
        s, t = sol.values[n], sol.values[n + 1]
        g, arg = lower_gamma(b, F, n)
        g = min(g, 1.0)
        if worst is None or g < worst[0]:
            worst = (g, arg, j, s, t, sol.max_residual)
    g, arg, j, s, t, resid = worst
    return BoundCertificate(
        side="lower",
        alpha=float(alpha),
        gamma=float(g),
        rho=float(t / s) if s > 0 else math.inf,
        nu=float(1.0 / s) if s > 0 else math.inf,
        kappa=math.nan,
        mechanism=Mechanism(tuple(Fs)),
        argmin=arg,
        basis_index=j,
        residual=resid,
    )


# --- sweeps and inversion ---------------------------------------------------


@dataclass(frozen=True)
class FrontierPoint:
    alpha: float
    pos_upper: float
    pos_lower: float
    rho: float = math.nan
    gamma: float = math.nan
    kappa: float = math.nan
    error: str | None = None


def _point(cls, alpha, search, backend) -> FrontierPoint:
    errors = []
    up = lo = None
    try:
        up = pos_upper_bound(cls, alpha, search, backend)
    except TollError as exc:
        errors.append(f"upper: {exc}")
    try:
        lo = pos_lower_bound(cls, alpha, backend)
    except TollError as exc:
        errors.append(f"lower: {exc}")
    return FrontierPoint(
        alpha=float(alpha),
        pos_upper=up.pos if up else math.nan,
        pos_lower=lo.pos if lo else math.nan,
        rho=up.rho if up else math.nan,
        gamma=up.gamma if up else math.nan,
        kappa=up.kappa if up else math.nan,
        error="; ".join(errors) or None,
    )


def sweep_frontier(cls: GameClass, alpha_grid, search: KappaSearch | None = None, jobs: int = 1, backend: str = "highs") -> list[FrontierPoint]:
    """Upper and lower bound at every grid point; failures are recorded per point."""
    grid = sorted(float(a) for a in alpha_grid)
    min_achievable_poa(cls, backend)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            pts = list(pool.map(lambda a: _point(cls, a, search, backend), grid))
    else:
        pts = [_point(cls, a, search, backend) for a in grid]
    return sorted(pts, key=lambda p: p.alpha)


def _fmt(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6f}"


def frontier_csv(points: list[FrontierPoint]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["alpha", "pos_upper", "pos_lower", "rho", "gamma", "kappa"])
    for p in points:
        w.writerow([_fmt(p.alpha), _fmt(p.pos_upper), _fmt(p.pos_lower), _fmt(p.rho), _fmt(p.gamma), _fmt(p.kappa)])
    return out.getvalue()


def min_poa_for_pos_target(cls: GameClass, pos_target: float, search: KappaSearch | None = None,
                           rel_width: float = 1e-3, backend: str = "highs") -> BoundCertificate:
    """Smallest alpha whose upper PoS bound meets ``pos_target``, bracketed by bisection."""
    if not pos_target >= 1.0:
        raise ConfigError(f"PoS target {pos_target} is unreachable: PoS is always >= 1")
    lo = min_achievable_poa(cls, backend)
    cert_lo = pos_upper_bound(cls, lo, search, backend)
    if cert_lo.pos <= pos_target + 1e-12:
        return cert_lo
    hi = 2.0 * lo
    cert_hi = pos_upper_bound(cls, hi, search, backend)
    while cert_hi.pos > pos_target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise ConfigError(f"PoS target {pos_target} not met for any alpha up to 1e12")
        cert_hi = pos_upper_bound(cls, hi, search, backend)
    while (hi - lo) > rel_width * hi:
        mid = 0.5 * (lo + hi)
        cert = pos_upper_bound(cls, mid, search, backend)
        if cert.pos <= pos_target:
            hi, cert_hi = mid, cert
        else:
            lo = mid
    return cert_hi
