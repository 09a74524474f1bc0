"""Exact analysis of small congestion games with tolls.

Users pick one action (a set of resources) each. Resource e charges
``ell_e(load)`` to the system and users perceive ``ell_e(load) + tau_e(load)``.
Everything here is brute force over the assignment space, vectorized with
numpy: all assignments are enumerated in lexicographic order (user 0 most
significant), which also fixes every tie-break.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapExceeded, ConfigError
from .model import BasisFunction, marginal_cost_values

TIE_TOL = 1e-9
DEFAULT_CAP = 10**6


@dataclass(frozen=True, eq=False)
class Resource:
    """Cost and toll tables indexed by load 1..len."""

    ell: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        ell = np.array(self.ell, dtype=float)
        tau = np.array(self.tau, dtype=float)
        if ell.ndim != 1 or ell.shape != tau.shape or len(ell) == 0:
            raise ConfigError("ell and tau must be nonempty tables of equal length")
        if not (np.all(np.isfinite(ell)) and np.all(np.isfinite(tau))):
            raise ConfigError("resource tables must be finite")
        ell.setflags(write=False)
        tau.setflags(write=False)
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "tau", tau)


@dataclass(frozen=True, eq=False)
class Game:
    users: tuple[tuple[frozenset, ...], ...]
    resources: tuple[Resource, ...]

    def __post_init__(self):
        users = tuple(tuple(frozenset(int(e) for e in a) for a in acts) for acts in self.users)
        resources = tuple(self.resources)
        if not users:
            raise ConfigError("a game needs at least one user")
        for i, acts in enumerate(users):
            if not acts:
                raise ConfigError(f"user {i} has no actions")
            for a in acts:
                for e in a:
                    if not 0 <= e < len(resources):
                        raise ConfigError(f"user {i} references unknown resource {e}")
        for e, r in enumerate(resources):
            if len(r.ell) < len(users):
                raise ConfigError(f"resource {e} is tabulated up to load {len(r.ell)} < {len(users)} users")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "resources", resources)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_resources(self) -> int:
        return len(self.resources)

    def size(self) -> int:
        return math.prod(len(a) for a in self.users)

    # tables padded with load 0 -> 0
    def _tables(self):
        L = max(len(r.ell) for r in self.resources)
        ell = np.zeros((self.n_resources, L + 1))
        per = np.zeros((self.n_resources, L + 1))
        for e, r in enumerate(self.resources):
            ell[e, 1 : len(r.ell) + 1] = r.ell
            per[e, 1 : len(r.ell) + 1] = r.ell + r.tau
        return ell, per

    def _incidence(self):
        out = []
        for acts in self.users:
            m = np.zeros((len(acts), self.n_resources), dtype=np.int64)
            for k, a in enumerate(acts):
                m[k, list(a)] = 1
            out.append(m)
        return out

    def to_json(self, header: dict | None = None) -> dict:
        doc = {
            "users": [[sorted(a) for a in acts] for acts in self.users],
            "resources": [{"ell": r.ell.tolist(), "tau": r.tau.tolist()} for r in self.resources],
        }
        if header is not None:
            doc["header"] = header
        return doc

    def dumps(self, header: dict | None = None) -> str:
        return json.dumps(self.to_json(header), indent=2)

    @classmethod
    def from_json(cls, doc) -> "Game":
        if isinstance(doc, str):
            try:
                doc = json.loads(doc)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"malformed game JSON: {exc}") from None
        if not isinstance(doc, dict) or "users" not in doc or "resources" not in doc:
            raise ConfigError("game JSON needs 'users' and 'resources'")
        try:
            users = tuple(tuple(frozenset(int(e) for e in a) for a in acts) for acts in doc["users"])
            resources = tuple(Resource(r["ell"], r.get("tau", [0.0] * len(r["ell"]))) for r in doc["resources"])
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"game JSON does not match the schema: {exc}") from None
        return cls(users, resources)


Assignment = tuple


def _check_assignment(game: Game, a) -> tuple:
    a = tuple(int(k) for k in a)
    if len(a) != game.n_users or any(not 0 <= k < len(acts) for k, acts in zip(a, game.users)):
        raise ConfigError(f"invalid assignment {a}")
    return a


def loads(game: Game, a) -> np.ndarray:
    a = _check_assignment(game, a)
    out = np.zeros(game.n_resources, dtype=np.int64)
    for acts, k in zip(game.users, a):
        for e in acts[k]:
            out[e] += 1
    return out


def social_cost(game: Game, a) -> float:
    """Sum over users of the true resource costs; tolls are transfers and excluded."""
    x = loads(game, a)
    ell, _ = game._tables()
    return float(math.fsum(x[e] * ell[e, x[e]] for e in range(game.n_resources)))


def user_cost(game: Game, a, i: int) -> float:
    a = _check_assignment(game, a)
    x = loads(game, a)
    _, per = game._tables()
    return float(math.fsum(per[e, x[e]] for e in game.users[i][a[i]]))


def rosenthal_potential(game: Game, a) -> float:
    x = loads(game, a)
    _, per = game._tables()
    return float(math.fsum(math.fsum(per[e, 1 : x[e] + 1]) for e in range(game.n_resources)))


# --- vectorized enumeration --------------------------------------------------


class _Space:
    """All assignments with their loads, social costs and perceived user costs."""

    def __init__(self, game: Game, cap: int):
        size = game.size()
        if size > cap:
            raise CapExceeded(f"assignment space has {size} points, cap is {cap}")
        self.game = game
        dims = [len(acts) for acts in game.users]
        self.A = np.indices(dims).reshape(len(dims), -1).T  # lexicographic order
        self.inc = game._incidence()
        self.ell, self.per = game._tables()
        X = np.zeros((len(self.A), game.n_resources), dtype=np.int64)
        for i, m in enumerate(self.inc):
            X += m[self.A[:, i]]
        self.X = X
        cols = np.arange(game.n_resources)
        self.sc = np.sum(X * self.ell[cols, X], axis=1)
        cum = np.cumsum(self.per, axis=1)
        self.phi = np.sum(cum[cols, X], axis=1)

    def user_costs(self, i: int, X: np.ndarray, act: np.ndarray) -> np.ndarray:
        cols = np.arange(self.game.n_resources)
        return np.sum(self.inc[i][act] * self.per[cols, X], axis=1)

    def best_deviation_gain(self, tie_tol: float) -> np.ndarray:
        """Per assignment, whether some user can improve by more than tie_tol."""
        unstable = np.zeros(len(self.A), dtype=bool)
        for i, m in enumerate(self.inc):
            cur = self.A[:, i]
            base = self.X - m[cur]
            c0 = self.user_costs(i, self.X, cur)
            for k in range(len(m)):
                alt = np.full(len(self.A), k)
                c1 = self.user_costs(i, base + m[k], alt)
                unstable |= (c1 < c0 - tie_tol * (1.0 + np.abs(c0))) & (cur != k)
        return unstable


def enumerate_pure_nash(game: Game, cap: int = DEFAULT_CAP, tie_tol: float = TIE_TOL) -> list[tuple]:
    """All pure Nash equilibria, in lexicographic order."""
    sp = _Space(game, cap)
    stable = ~sp.best_deviation_gain(tie_tol)
    return [tuple(int(v) for v in row) for row in sp.A[stable]]


@dataclass(frozen=True)
class GameMetrics:
    poa: float
    pos: float
    posa: float
    min_cost: float
    equilibria: tuple
    potential_minimizer: tuple
    optimum: tuple

    def to_json(self) -> dict:
        return {
            "equilibria": [list(e) for e in self.equilibria],
            "minCost": self.min_cost,
            "poa": self.poa,
            "pos": self.pos,
            "posa": self.posa,
            "potentialMinimizer": list(self.potential_minimizer),
        }


def _ratio(cost: float, best: float) -> float:
    if best <= 0:
        return 1.0 if cost <= 0 else math.inf
    return cost / best


def exact_metrics(game: Game, cap: int = DEFAULT_CAP, tie_tol: float = TIE_TOL) -> GameMetrics:
    sp = _Space(game, cap)
    stable = ~sp.best_deviation_gain(tie_tol)
    k_opt = int(np.argmin(sp.sc))
    min_cost = float(sp.sc[k_opt])
    eq_sc = sp.sc[stable]
    k_pot = int(np.argmin(sp.phi))  # first minimizer in lexicographic order
    return GameMetrics(
        poa=_ratio(float(eq_sc.max()), min_cost),
        pos=_ratio(float(eq_sc.min()), min_cost),
        posa=_ratio(float(sp.sc[k_pot]), min_cost),
        min_cost=min_cost,
        equilibria=tuple(tuple(int(v) for v in row) for row in sp.A[stable]),
        potential_minimizer=tuple(int(v) for v in sp.A[k_pot]),
        optimum=tuple(int(v) for v in sp.A[k_opt]),
    )


@dataclass(frozen=True)
class BestResponsePath:
    path: tuple
    converged: bool


def best_response_path(game: Game, start, max_steps: int = 10_000, tie_tol: float = TIE_TOL) -> BestResponsePath:
    """Round-robin strict best responses; stops at an equilibrium or after max_steps moves."""
    if max_steps < 1:
        raise ConfigError("max_steps must be >= 1")
    a = list(_check_assignment(game, start))
    path = [tuple(a)]
    moves = 0
    idle = 0
    i = 0
    while moves < max_steps:
        costs = []
        for k in range(len(game.users[i])):
            b = list(a)
            b[i] = k
            costs.append(user_cost(game, b, i))
        k_best = int(np.argmin(costs))
        if costs[k_best] < costs[a[i]] - tie_tol * (1.0 + abs(costs[a[i]])):
            a[i] = k_best
            path.append(tuple(a))
            moves += 1
            idle = 0
        else:
            idle += 1
            if idle >= game.n_users:
                return BestResponsePath(tuple(path), True)
        i = (i + 1) % game.n_users
    # max_steps moves made; converged only if the final point is stable
    stable = all(
        user_cost(game, a, j) <= min(user_cost(game, a[:j] + [k] + a[j + 1 :], j) for k in range(len(game.users[j])))
        + tie_tol * (1.0 + abs(user_cost(game, a, j)))
        for j in range(game.n_users)
    )
    return BestResponsePath(tuple(path), stable)


def eliminate_dominated(game: Game, order: Sequence[int] | None = None, tie_tol: float = TIE_TOL):
    """Iterated elimination of strictly dominated actions, one pass per user in ``order``.

    An action is removed when another remaining action of the same user is
    strictly cheaper against every remaining profile of the others. Returns
    the surviving action indices per user.
    """
    order = list(range(game.n_users)) if order is None else list(order)
    alive = [list(range(len(acts))) for acts in game.users]
    for i in order:
        others = [alive[j] if j != i else [0] for j in range(game.n_users)]
        profiles = list(itertools.product(*others))
        cost = {}
        for k in alive[i]:
            row = []
            for prof in profiles:
                b = list(prof)
                b[i] = k
                row.append(user_cost(game, b, i))
            cost[k] = np.array(row)
        keep = []
        for k in alive[i]:
            dominated = any(
                np.all(cost[k2] < cost[k] - tie_tol * (1.0 + np.abs(cost[k]))) for k2 in alive[i] if k2 != k
            )
            if not dominated:
                keep.append(k)
        alive[i] = keep
    return alive


def dominance_solvable(game: Game, order: Sequence[int] | None = None) -> bool:
    return all(len(s) == 1 for s in eliminate_dominated(game, order))


# --- constructions ------------------------------------------------------------


def _basis_table(basis, length: int) -> np.ndarray:
    if isinstance(basis, BasisFunction):
        if basis.n + 1 < length:
            raise ConfigError(f"basis tabulated up to load {basis.n + 1}, need {length}")
        return np.array(basis.values[1 : length + 1], dtype=float)
    vals = np.asarray(basis, dtype=float)
    if len(vals) < length:
        raise ConfigError(f"basis table needs {length} entries from load 1")
    return vals[:length].copy()


def _check_eps(eps: float, tie_tol: float = TIE_TOL) -> None:
    if not eps > 10 * tie_tol:
        raise ConfigError(f"eps={eps:g} must exceed 10*tieTol={10 * tie_tol:g} for strict preferences")


def _scaled(b: np.ndarray, F: np.ndarray, factor: float, weight: float = 1.0) -> Resource:
    """Resource with cost weight*b*factor and perceived cost weight*F*factor."""
    ell = weight * factor * b
    return Resource(ell, weight * factor * F - ell)


def worst_case_choice(b: np.ndarray, F: np.ndarray, n: int) -> int:
    """y maximizing b(n)n / [(n-y)F(n) + b(y)y], with F(1)=1 scaling; first on ties."""
    ratios = []
    for y in range(n + 1):
        by = b[y - 1] * y if y >= 1 else 0.0
        ratios.append(b[n - 1] * n / ((n - y) * F[n - 1] + by))
    best = max(ratios)
    return next(y for y, r in enumerate(ratios) if r >= best * (1 - 1e-12))


def build_worst_case_game_poa(basis, F, n: int, eps: float) -> Game:
    """Game whose unique equilibrium puts everyone on e_0; PoS -> 1/rho as eps -> 0.

    Users 1..n-y* may move to a private resource of cost (F(n)+eps) b; the
    remaining y* users sit on e_0. Costs and F are scaled jointly so F(1)=1.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    _check_eps(eps)
    b = _basis_table(basis, n)
    F = np.asarray(F, dtype=float)[:n].copy()
    if len(F) < n or F[0] <= 0:
        raise ConfigError("F needs n entries with F(1) > 0")
    if np.any(np.diff(F) < -1e-9 * max(1.0, np.max(np.abs(F)))):
        raise ConfigError("worst-case construction needs nondecreasing F")
    scale = 1.0 / F[0]
    bs, Fs = b * scale, F * scale
    if n == 1:
        return Game(((frozenset({0}),),), (_scaled(bs, Fs, 1.0),))
    y = worst_case_choice(bs, Fs, n)
    if y == n:
        raise ConfigError("degenerate construction: y* = n, the mechanism has rho = 1")
    movers = n - y
    resources = [_scaled(bs, Fs, 1.0)] + [_scaled(bs, Fs, 1.0, Fs[n - 1] + eps) for _ in range(movers)]
    users = tuple((frozenset({0}), frozenset({i + 1})) for i in range(movers)) + tuple(
        (frozenset({0}),) for _ in range(y)
    )
    return Game(users, tuple(resources))


def build_lower_bound_game(basis, F, u: int, v: int, eps: float) -> Game:
    """Dominance-solvable game with u users; users 1..u-v may leave e_0 for e_k.

    Resource e_k costs alpha_k b with alpha_k = max_{v+k <= x <= u} F(x) + eps;
    F is normalized to F(1) = 1 first.
    """
    if not 0 <= v < u:
        raise ConfigError("need 0 <= v < u")
    _check_eps(eps)
    b = _basis_table(basis, u)
    F = np.asarray(F, dtype=float)
    if len(F) < u or F[0] <= 0:
        raise ConfigError("F needs u entries with F(1) > 0")
    F = F[:u] / F[0]
    resources = [_scaled(b, F, 1.0)]
    for k in range(1, u - v + 1):
        alpha_k = float(np.max(F[v + k - 1 : u])) + eps
        resources.append(_scaled(b, F, 1.0, alpha_k))
    users = tuple((frozenset({0}), frozenset({k})) for k in range(1, u - v + 1)) + tuple(
        (frozenset({0}),) for _ in range(v)
    )
    return Game(users, tuple(resources))


def lower_bound_ratio(basis, F, u: int, v: int) -> float:
    """Closed-form eps -> 0 ratio b(u)u / [b(v)v + b(1) sum_k max F] of the game above."""
    b = _basis_table(basis, u)
    F = np.asarray(F, dtype=float)[:u] / float(F[0])
    bv = b[v - 1] * v if v >= 1 else 0.0
    s = math.fsum(float(np.max(F[v + k - 1 : u])) for k in range(1, u - v + 1))
    return b[u - 1] * u / (bv + b[0] * s)


def build_pos_deviation_game(basis, k: int, eps: float, direction: str = "above", tau=None) -> Game:
    """Two-resource game exposing a toll that differs from marginal cost at load k.

    Users 1..k-1 sit on e_0; user k may switch to e_1, whose cost is
    c * ell with c = (mc(k) +/- eps) / ell(1), mc(k) = ell(k)k - ell(k-1)(k-1).
    ``tau`` is the toll table of the mechanism under test (default: marginal
    cost). Perceived costs are rescaled so that F(1) = ell(1).
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    if direction not in ("above", "below"):
        raise ConfigError("direction must be 'above' or 'below'")
    _check_eps(eps)
    ell = _basis_table(basis, k)
    if ell[0] <= 0:
        raise ConfigError("deviation game needs ell(1) > 0")
    padded = np.concatenate(([0.0], ell))
    mc = x_mc = marginal_cost_values(_Table(padded), k)
    if tau is None:
        F = x_mc.copy()
    else:
        tau = np.asarray(tau, dtype=float)
        if len(tau) < k:
            raise ConfigError(f"toll table needs {k} entries")
        F = ell + tau[:k]
    if F[0] <= 0:
        raise ConfigError("perceived cost at load 1 must be positive")
    F = F * ell[0] / F[0]
    gap = abs(F[k - 1] - mc[k - 1])
    if gap > 1e-12 and not eps < gap:
        raise ConfigError(f"eps={eps:g} must be below the toll gap {gap:g} at load k")
    sign = 1.0 if direction == "above" else -1.0
    c = (mc[k - 1] + sign * eps) / ell[0]
    resources = (_scaled(ell, F, 1.0), _scaled(ell, F, 1.0, c))
    users = tuple((frozenset({0}),) for _ in range(k - 1)) + ((frozenset({0}), frozenset({1})),)
    return Game(users, resources)


class _Table:
    """Minimal stand-in exposing ``values`` for marginal_cost_values."""

    def __init__(self, values):
        self.values = values


# --- random games for property tests ----------------------------------------


def random_game(rng: np.random.Generator, max_users: int = 4, max_resources: int = 4, max_actions: int = 3,
                tau: str = "random", scale: float = 5.0) -> Game:
    """Random game with nonnegative uniform cost tables; ``tau`` is 'random', 'zero' or 'marginal'."""
    n = int(rng.integers(1, max_users + 1))
    R = int(rng.integers(1, max_resources + 1))
    resources = []
    for _ in range(R):
        ell = rng.uniform(0.0, scale, size=n)
        if tau == "zero":
            t = np.zeros(n)
        elif tau == "marginal":
            x = np.arange(1, n + 1)
            prev = np.concatenate(([0.0], ell[:-1]))
            t = x * ell - (x - 1) * prev - ell
        else:
            t = rng.uniform(-scale / 2, scale / 2, size=n)
        resources.append(Resource(ell, t))
    users = []
    for _ in range(n):
        k = int(rng.integers(1, max_actions + 1))
        acts = []
        for _ in range(k):
            size = int(rng.integers(1, R + 1))
            acts.append(frozenset(int(e) for e in rng.choice(R, size=size, replace=False)))
        users.append(tuple(acts))
    return Game(tuple(users), tuple(resources))


def game_under_mechanism(rng: np.random.Generator, bases: Sequence, F: Sequence, max_users: int = 4,
                         max_resources: int = 4, max_actions: int = 3) -> Game:
    """Random game whose resource costs are nonnegative combinations of the bases.

    ``bases[j]`` and ``F[j]`` are tables on loads 1..n; the toll on a resource is
    the same combination of ``F_j - b_j``.
    """
    n_max = min(len(F[0]), max_users)
    n = int(rng.integers(1, n_max + 1))
    R = int(rng.integers(1, max_resources + 1))
    resources = []
    for _ in range(R):
        w = rng.uniform(0.0, 1.0, size=len(bases)) * (rng.uniform(size=len(bases)) < 0.8)
        if not w.any():
            w[int(rng.integers(len(bases)))] = 1.0
        ell = sum(wj * np.asarray(b, dtype=float)[:n] for wj, b in zip(w, bases))
        per = sum(wj * np.asarray(f, dtype=float)[:n] for wj, f in zip(w, F))
        resources.append(Resource(ell, per - ell))
    users = []
    for _ in range(n):
        k = int(rng.integers(1, max_actions + 1))
        acts = []
        for _ in range(k):
            size = int(rng.integers(1, R + 1))
            acts.append(frozenset(int(e) for e in rng.choice(R, size=size, replace=False)))
        users.append(tuple(acts))
    return Game(tuple(users), tuple(resources))
