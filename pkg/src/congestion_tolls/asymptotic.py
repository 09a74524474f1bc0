"""Mechanisms for monomial costs x^d that stay certified for any number of users.

A finite program over loads ``1..nbar`` designs F; beyond ``h = nbar/2`` the
perturbed cost continues as ``beta [x^{d+1} - (x-1)^{d+1}]``, a scaled
marginal cost. Closed-form worst cases over the infinite tail give
``rho_inf`` (PoA side) and ``gamma_inf = min(gamma_hat, gamma1, gamma2,
gamma3)`` (PoS side); ``gamma2`` includes its constant ``beta kappa`` term.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _rows
from .errors import ConfigError, InfeasibleAlpha, NumericalFailure, TailNotSettled
from .frontier import golden_max
from .lp import LinearProgram, solve_lp, stack_rows
from .model import GameClass, index_array, monomial
from .poa import optimal_poa_mechanism

TAIL_FRACTION = 0.1


@dataclass(frozen=True)
class AsymptoticSearch:
    """kappa grid (0 and powers of two) then golden refinement in atan(kappa)."""

    exponents: tuple[int, ...] = tuple(range(-10, 15))
    max_evals: int = 45
    tol: float = 1e-4

    def thetas(self) -> list[float]:
        return sorted({0.0} | {math.atan(2.0**k) for k in self.exponents})


@dataclass(frozen=True, eq=False)
class AsymptoticExtension:
    d: int
    nbar: int
    epsilon: float
    poa_star: float
    beta: float
    finite_F: np.ndarray
    rho_hat: float
    gamma_hat: float
    kappa: float
    nu: float
    rho_inf: float = math.nan
    gamma_inf: float = math.nan
    gamma1: float = math.nan
    gamma2: float = math.nan
    gamma3: float = math.nan
    horizon: int = 0
    detail: dict = field(default_factory=dict)

    @property
    def h(self) -> int:
        return self.nbar // 2

    @property
    def poa_bound(self) -> float:
        return 1.0 / self.rho_inf if self.rho_inf > 0 else math.inf

    @property
    def pos_bound(self) -> float:
        return 1.0 / self.gamma_inf if self.gamma_inf > 0 else math.inf

    def F_inf(self, x) -> np.ndarray:
        """Extended perturbed cost at integer loads (0 at load 0)."""
        x = np.asarray(x, dtype=np.int64)
        out = np.zeros(x.shape, dtype=float)
        if self.d == 0:
            out[x >= 1] = self.finite_F[0]
            return out
        low = (x >= 1) & (x <= self.h)
        out[low] = self.finite_F[x[low] - 1]
        high = x > self.h
        xh = x[high]
        out[high] = self.beta * (_pow(xh, self.d + 1) - _pow(xh - 1, self.d + 1))
        return out

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "nbar": self.nbar,
            "epsilon": self.epsilon,
            "poa_star": self.poa_star,
            "beta": self.beta,
            "kappa": self.kappa,
            "nu": self.nu,
            "rho_hat": self.rho_hat,
            "gamma_hat": self.gamma_hat,
            "rho_inf": self.rho_inf,
            "gamma_inf": self.gamma_inf,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma3": self.gamma3,
            "poa_bound": self.poa_bound,
            "pos_bound": self.pos_bound,
            "F": [float(v) for v in self.finite_F],
            **{k: v for k, v in self.detail.items() if isinstance(v, (int, float, str, list))},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _pow(x, p: int) -> np.ndarray:
    """Exact integer powers, returned as float."""
    x = np.asarray(x, dtype=np.int64)
    return (x.astype(object) ** p).astype(float)


# --- finite program ----------------------------------------------------------


def _pairs(nbar: int) -> np.ndarray:
    x, y = np.meshgrid(np.arange(nbar + 1), np.arange(nbar + 1), indexing="ij")
    x, y = x.ravel(), y.ravel()
    keep = (x + y >= 1) & (x + y <= nbar)
    return np.stack([x[keep], y[keep], np.zeros(keep.sum(), dtype=x.dtype)], axis=1)


def _finite_lp(d: int, nbar: int, poa_star: float, epsilon: float, kappa: float, s_fixed: float | None = None):
    h = nbar // 2
    D = float(h ** (d + 1) - (h - 1) ** (d + 1))
    T = _pairs(nbar)
    x, y, _ = _rows.split(T)
    ncols = nbar + 3
    S, Tt, G = nbar, nbar + 1, nbar + 2
    px, py = _pow(x, d + 1), _pow(y, d + 1)
    P = _rows.perturbation_block(T, nbar, ncols, 0)
    K = _rows.potential_block(T, ncols, 0)
    poa_rows = P + _rows.column(py, ncols, S) - _rows.column(px, ncols, Tt)
    pos_rows = P + kappa * K - _rows.column(px, ncols, G)
    link = np.zeros((1, ncols))
    link[0, Tt], link[0, S] = 1.0, -1.0 / poa_star
    mono = np.zeros((nbar - 1, ncols))
    for k in range(1, nbar):
        mono[k - 1, k] = 1.0
        mono[k - 1, k - 1] = -1.0
    below = np.zeros((1, ncols))
    below[0, h - 1] = -1.0
    below[0, S] = float((h + 1) ** (d + 1) - h ** (d + 1))
    ystar = np.zeros((1, ncols))
    c1 = float((d + 1) * (h + 1) ** d)
    ystar[0, 0] += 1.0
    ystar[0, h - 1] += c1 * kappa / D
    bk = np.zeros((1, ncols))
    bk[0, h - 1] = kappa / D
    blocks = [
        (poa_rows, ">=", np.zeros(len(T))),
        (pos_rows, ">=", -py),
        (link, ">=", np.zeros(1)),
        (mono, ">=", np.zeros(nbar - 1)),
        (below, ">=", np.zeros(1)),
        (ystar, "<=", np.array([c1])),
        (bk, "<=", np.array([1.0 - epsilon])),
    ]
    A, senses, rhs = stack_rows(blocks)
    c = np.zeros(ncols)
    c[G] = 1.0
    lo = np.concatenate([np.zeros(nbar), [0.0, -np.inf, -np.inf]])
    hi = np.full(ncols, np.inf)
    if s_fixed is not None:
        lo[S] = hi[S] = s_fixed
    return LinearProgram(c, A, senses, rhs, lo, hi)


def _solve_finite(d, nbar, poa_star, epsilon, kappa, s_fixed=None, backend="highs"):
    try:
        sol = solve_lp(_finite_lp(d, nbar, poa_star, epsilon, kappa, s_fixed), backend=backend)
    except NumericalFailure:
        return None
    if not sol.optimal:
        return None
    v = sol.values
    F = np.maximum(v[:nbar], 0.0)
    s, t, g = v[nbar], v[nbar + 1], v[nbar + 2]
    if s <= 1e-12:
        return None
    return F, float(s), float(t), float(g)


# --- closed-form tails -------------------------------------------------------


def poa_inf(ext: AsymptoticExtension) -> float:
    """PoA bound 1/rho_inf of the extended mechanism."""
    return 1.0 / _rho_inf(ext) if _rho_inf(ext) > 0 else math.inf


def _rho_inf(ext: AsymptoticExtension) -> float:
    d, nbar, h = ext.d, ext.nbar, ext.h
    bn = ext.beta * ext.nu
    first = bn * h * (1.0 - (1.0 - 2.0 / nbar) ** (d + 1))
    second = d * ((bn / (d + 1)) * h * ((2.0 / nbar + 1.0) ** (d + 1) - 1.0)) ** (1.0 + 1.0 / d)
    return min(ext.rho_hat, first - second)


def _check_tail(values: np.ndarray, name: str) -> None:
    """The minimum must be interior and the last 10% of the scan nondecreasing."""
    k = int(np.argmin(values))
    if k == len(values) - 1:
        raise TailNotSettled(f"{name} attains its minimum at the horizon")
    tail = values[int(len(values) * (1 - TAIL_FRACTION)) :]
    scale = max(1.0, float(np.max(np.abs(tail))))
    if np.any(np.diff(tail) < -1e-12 * scale):
        raise TailNotSettled(f"{name} is still decreasing over the last {int(TAIL_FRACTION * 100)}% of the horizon")


def _gamma2_value(ext, y: int, r: float, csum: float) -> float:
    d, h, beta, kap = ext.d, ext.h, ext.beta, ext.kappa
    q = beta * kap
    p = d + 1
    # beta*y - beta (r+1)^{d+1} y / r^{d+1} written without cancellation
    lead = -beta * y * ((r + 1.0) ** p - r**p) / r**p
    body = y**p + beta * (r**p - (r - 1.0) ** p) * r + kap * csum - q * (h - 1) ** p
    return lead + body / r**p


def compute_gamma123(ext: AsymptoticExtension, horizon: int | None = None) -> tuple[float, float, float]:
    """gamma1, gamma2 and gamma3 of the extended mechanism (see module doc)."""
    return _gamma_parts(ext, horizon)[:3]


def _gamma_parts(ext: AsymptoticExtension, horizon: int | None = None):
    d, h, nbar = ext.d, ext.h, ext.nbar
    beta, kap = ext.beta, ext.kappa
    if not beta > 0:
        raise ConfigError("extension needs beta > 0 (F(nbar/2) must be positive)")
    horizon = horizon or 4 * nbar
    if horizon < 4 * nbar:
        raise ConfigError("horizon must be at least 4*nbar")
    q = beta * kap
    if not 1.0 - q > 0:
        raise ConfigError("extension needs 1 - beta*kappa > 0")
    p = d + 1
    F = np.concatenate(([0.0], ext.finite_F))  # F(0..nbar)
    ph = float(h**p)

    g1 = math.inf
    for x in range(1, h):
        yh = max(h + 1.0, (F[x + 1] / (d + 1) / (1.0 - q)) ** (1.0 / d))
        tail = math.fsum(F[x + 1 : h + 1])
        val = (yh**p + F[x] * x - F[x + 1] * yh - kap * tail - q * (yh**p - ph)) / float(x**p)
        g1 = min(g1, val)

    rs = np.arange(h, horizon + 1)
    R = _pow(rs, p)
    Rm = _pow(rs - 1, p)
    Rp = _pow(rs + 1, p)
    best_r = np.full(len(rs), np.inf)
    arg_y = np.zeros(len(rs), dtype=int)
    for y in range(0, h):
        csum = math.fsum(F[y + 1 : h])
        lead = -beta * y * (Rp - R) / R
        body = float(y**p) + beta * (R - Rm) * rs + kap * csum - q * float((h - 1) ** p)
        vals = lead + body / R
        better = vals < best_r
        best_r[better] = vals[better]
        arg_y[better] = y
    _check_tail(best_r, "gamma2")
    k = int(np.argmin(best_r))
    g2_int = float(best_r[k])
    # continuous refinement in r around the best integer, for the minimizing y
    y_star = int(arg_y[k])
    csum = math.fsum(F[y_star + 1 : h])
    lo, hi = max(float(h), rs[k] - 1.0), rs[k] + 1.0
    f = lambda r: _gamma2_value(ext, y_star, r, csum)  # noqa: E731
    for _ in range(100):
        m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    # the constant beta*kappa term is independent of (y, r)
    g2_int += q
    g2_real = min(g2_int, f(0.5 * (lo + hi)) + q)
    g2 = g2_real

    xs = np.arange(h, horizon + 1)
    X = _pow(xs, p)
    Xm = _pow(xs - 1, p)
    Xp = _pow(xs + 1, p)
    yh = np.maximum(float(h), (beta * (Xp - X) / (d + 1) / (1.0 - q)) ** (1.0 / d))
    vals3 = q + ((1.0 - q) * yh**p + beta * (X - Xm) * xs - beta * (Xp - X) * yh) / X
    _check_tail(vals3, "gamma3")
    g3 = float(np.min(vals3))
    detail = {
        "gamma2_integer_r": g2_int,
        "gamma2_real_r": g2_real,
        "gamma2_argmin": [int(y_star), int(rs[k])],
        "gamma3_argmin": int(xs[int(np.argmin(vals3))]),
    }
    return float(g1), float(g2), float(g3), detail


def finalize(ext: AsymptoticExtension, horizon: int | None = None) -> AsymptoticExtension:
    """Fill in rho_inf, gamma_inf and gamma1..3."""
    horizon = horizon or 4 * ext.nbar
    g1, g2, g3, detail = _gamma_parts(ext, horizon)
    rho = _rho_inf(ext)
    gamma = min(ext.gamma_hat, g1, g2, g3)
    return replace(ext, rho_inf=float(rho), gamma_inf=float(gamma), gamma1=g1, gamma2=g2, gamma3=g3,
                   horizon=horizon, detail={**ext.detail, **detail})


def _min_poa_monomial(d: int, nbar: int, backend: str) -> float:
    return optimal_poa_mechanism(GameClass(nbar, (monomial(d, nbar),)), backend).poa


def _extension(d, nbar, poa_star, epsilon, kappa, solved, horizon) -> AsymptoticExtension | None:
    F, s, t, g = solved
    h = nbar // 2
    D = float(h ** (d + 1) - (h - 1) ** (d + 1))
    beta = F[h - 1] / D
    if beta <= 0:
        return None
    ext = AsymptoticExtension(d=d, nbar=nbar, epsilon=epsilon, poa_star=poa_star, beta=float(beta),
                              finite_F=F, rho_hat=t / s, gamma_hat=g, kappa=float(kappa), nu=1.0 / s)
    return finalize(ext, horizon)


def solve_asymptotic_program(d: int, nbar: int = 50, poa_star: float = math.inf, epsilon: float = 1e-6,
                             search: AsymptoticSearch | None = None, horizon: int | None = None,
                             require_poa: bool = True, backend: str = "highs") -> AsymptoticExtension:
    """Best extension over the kappa search.

    A kappa is skipped when its LP is infeasible, a tail minimum has not
    settled within the horizon, or (with ``require_poa``) the extended
    mechanism's PoA bound exceeds ``poa_star``.
    """
    _check_args(d, nbar, epsilon)
    search = search or AsymptoticSearch()
    min_poa = _min_poa_monomial(d, nbar, backend)
    if poa_star < (1.0 - 1e-9) * min_poa:
        raise InfeasibleAlpha(poa_star, min_poa)
    poa_eff = max(poa_star, min_poa)

    def evaluate(theta):
        kappa = math.tan(theta)
        solved = _solve_finite(d, nbar, poa_eff, epsilon, kappa, backend=backend)
        if solved is None:
            return None
        try:
            ext = _extension(d, nbar, poa_star, epsilon, kappa, solved, horizon)
        except (TailNotSettled, ConfigError):
            return None
        if ext is None or not ext.rho_inf > 0:
            return None
        if require_poa and ext.poa_bound > poa_eff * (1.0 + 1e-6):
            return None
        return ext.gamma_inf, ext

    best = golden_max(evaluate, search.thetas(), search.max_evals, search.tol)
    if best is None:
        raise NumericalFailure(
            f"no valid kappa for d={d}, nbar={nbar}, poa*={poa_star:.6f}, epsilon={epsilon:g}: "
            "every slice was infeasible, unsettled, or above the PoA requirement"
        )
    return best[2]


def _check_args(d, nbar, epsilon):
    if d < 1:
        raise ConfigError("degree must be >= 1 (use multi_basis_extension for constants)")
    if nbar < 2 or nbar % 2:
        raise ConfigError("nbar must be an even integer >= 2")
    if not epsilon > 0:
        raise ConfigError("epsilon must be > 0")


def constant_extension(poa_star: float, kappa: float, nu: float, nbar: int, epsilon: float) -> AsymptoticExtension:
    """Degree 0: with F = c constant, PoA rows need nu c <= 1 and PoS rows (1+kappa) c <= 1."""
    c = min(1.0 / nu, 1.0 / (1.0 + kappa))
    rho, gamma = nu * c, (1.0 + kappa) * c
    return AsymptoticExtension(d=0, nbar=nbar, epsilon=epsilon, poa_star=poa_star, beta=0.0,
                               finite_F=np.full(nbar, c), rho_hat=rho, gamma_hat=gamma, kappa=kappa, nu=nu,
                               rho_inf=rho, gamma_inf=gamma, gamma1=math.inf, gamma2=math.inf, gamma3=math.inf)


def multi_basis_extension(degrees, poa_star: float, kappa: float, nu: float, nbar: int = 50,
                          epsilon: float = 1e-6, horizon: int | None = None, backend: str = "highs"):
    """Per-degree extensions with kappa and nu shared; returns (extensions, poa_bound, pos_bound)."""
    if kappa < 0 or not nu > 0:
        raise ConfigError("need kappa >= 0 and nu > 0")
    exts = []
    for d in degrees:
        d = int(d)
        if d == 0:
            exts.append(constant_extension(poa_star, kappa, nu, nbar, epsilon))
            continue
        _check_args(d, nbar, epsilon)
        solved = _solve_finite(d, nbar, poa_star, epsilon, kappa, s_fixed=1.0 / nu, backend=backend)
        if solved is None:
            raise NumericalFailure(f"degree {d}: program infeasible with kappa={kappa:g}, nu={nu:g}")
        ext = _extension(d, nbar, poa_star, epsilon, kappa, solved, horizon)
        if ext is None:
            raise NumericalFailure(f"degree {d}: F(nbar/2) = 0, extension undefined")
        exts.append(ext)
    poa = max(e.poa_bound for e in exts)
    pos = max(e.pos_bound for e in exts)
    return exts, poa, pos


def min_poa_for_pos_target_asymptotic(d: int, pos_target: float, nbar: int = 50, epsilon: float = 1e-6,
                                      search: AsymptoticSearch | None = None, rel_width: float = 1e-3,
                                      backend: str = "highs") -> AsymptoticExtension:
    """Smallest PoA requirement whose extension certifies PoS <= pos_target."""
    if not pos_target >= 1.0:
        raise ConfigError(f"PoS target {pos_target} is unreachable: PoS is always >= 1")
    _check_args(d, nbar, epsilon)
    lo = _min_poa_monomial(d, nbar, backend)

    def run(a):
        try:
            return solve_asymptotic_program(d, nbar, a, epsilon, search, backend=backend)
        except NumericalFailure:
            return None

    # PoS <= PoA <= alpha, so the degenerate endpoint alpha = lo can only
    # meet targets at or above it
    if pos_target >= lo:
        ext = run(lo)
        if ext is not None and ext.pos_bound <= pos_target:
            return ext
    hi = 2.0 * lo
    best = run(hi)
    while best is None or best.pos_bound > pos_target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e9:
            raise ConfigError(f"PoS target {pos_target} not reached for PoA requirements up to 1e9")
        best = run(hi)
    while hi - lo > rel_width * hi:
        mid = 0.5 * (lo + hi)
        ext = run(mid)
        if ext is not None and ext.pos_bound <= pos_target:
            hi, best = mid, ext
        else:
            lo = mid
    return best


def transfer_residuals(ext: AsymptoticExtension, n: int | None = None) -> tuple[float, float]:
    """Smallest slack of the PoA rows (rho_inf, nu) and PoS rows (gamma_inf, 1, kappa) at n users.

    Rows use z = max(0, x+y-n), the exact reduction for nondecreasing F.
    Nonnegative values mean the extension's certificates hold at n.
    """
    n = n or 4 * ext.nbar
    T = index_array(n, "reduced")
    x, y, _ = _rows.split(T)
    Fp = np.concatenate((ext.F_inf(np.arange(0, n + 1)), [0.0]))
    G = _rows.perturbation_values(Fp, T)
    K = _rows.potential_values(Fp, T)
    p = ext.d + 1
    px, py = _pow(x, p), _pow(y, p)
    scale = 1.0 + np.maximum(px, py)
    poa_slack = (py - ext.rho_inf * px + ext.nu * G) / scale
    pos_slack = (py - ext.gamma_inf * px + G + ext.kappa * K) / scale
    return float(poa_slack.min()), float(pos_slack.min())
