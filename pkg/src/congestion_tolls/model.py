"""Domain types: basis functions, game classes, mechanisms and constraint index sets.

A game class is a maximum user count ``n`` together with basis functions
``b_1, ..., b_m``; every resource cost is a nonnegative combination of them.
A local linear mechanism assigns each basis a perturbed cost ``F_j`` on loads
``1..n``, and the toll on ``b_j`` is ``F_j - b_j``.

All tables are indexed by load, with the boundary conventions
``b(0) = F(0) = F(n+1) = 0`` built into the accessors.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError

_TOL = 1e-12


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BasisFunction:
    """A basis cost tabulated on loads ``0..n+1``.

    ``values[0]`` is always 0. Flags are computed from the table, never taken
    from input. Shape flags are scanned over loads ``1..n+1`` so that the
    mandatory zero at load 0 does not make a constant cost look concave.
    """

    values: np.ndarray
    kind: str = "tabulated"
    degree: int | None = None
    positive: bool = field(init=False)
    nondecreasing: bool = field(init=False)
    convex: bool = field(init=False)

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 1 or len(vals) < 3:
            raise ConfigError("a basis needs values on at least loads 0, 1, 2")
        if not np.all(np.isfinite(vals)):
            raise ConfigError("basis values must be finite")
        if vals[0] != 0.0:
            raise ConfigError("basis value at load 0 must be 0")
        object.__setattr__(self, "values", vals)
        body = vals[1:]
        steps = np.diff(body)
        scale = max(1.0, float(np.max(np.abs(body))))
        object.__setattr__(self, "positive", bool(np.all(body > 0)))
        object.__setattr__(self, "nondecreasing", bool(np.all(steps >= -_TOL * scale)))
        object.__setattr__(self, "convex", bool(np.all(np.diff(steps) >= -_TOL * scale)))

    @property
    def n(self) -> int:
        return len(self.values) - 2

    def at(self, x: int) -> float:
        """Value at load x, with 0 outside ``0..n+1`` (so b(-1) = 0)."""
        if x < 0 or x > self.n + 1:
            return 0.0
        return float(self.values[x])

    def weighted(self) -> np.ndarray:
        """Array of ``b(x)*x`` for x in ``0..n+1``."""
        return self.values * np.arange(len(self.values))

    def label(self) -> str:
        if self.kind == "monomial":
            return f"monomial:{self.degree}"
        return "table:" + json.dumps([float(v) for v in self.values[1:]])

    def __repr__(self):
        return f"BasisFunction({self.label()}, n={self.n})"


def monomial(d: int, n: int) -> BasisFunction:
    if d < 0:
        raise ConfigError("monomial degree must be >= 0")
    if n < 1:
        raise ConfigError("n must be >= 1")
    x = np.arange(n + 2, dtype=float)
    vals = x**d
    vals[0] = 0.0
    return BasisFunction(vals, kind="monomial", degree=d)


def tabulated(table: Sequence[float], n: int, require_positive: bool = False) -> BasisFunction:
    """Basis from explicit values at loads ``1, 2, ...``; needs at least n+1 entries."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    table = [float(v) for v in table]
    if not table:
        raise ConfigError("empty basis table")
    if len(table) < n + 1:
        raise ConfigError(f"basis table has {len(table)} entries, loads 1..{n + 1} are required")
    if require_positive and min(table) < 0:
        raise ConfigError("negative table entry in a basis flagged positive")
    return BasisFunction(np.array([0.0] + table[: n + 1]), kind="tabulated")


_MONO = re.compile(r"^monomial:(\d+)$")
_POLY = re.compile(r"^poly:(\d+)$")


def make_basis(spec, n: int, require_positive: bool = False) -> BasisFunction:
    """Build one basis from ``monomial:<d>``, ``table:[v1,...]``, an int degree or a list."""
    if isinstance(spec, BasisFunction):
        if spec.n != n:
            raise ConfigError(f"basis tabulated for n={spec.n}, expected n={n}")
        return spec
    if isinstance(spec, (int, np.integer)):
        return monomial(int(spec), n)
    if isinstance(spec, (list, tuple, np.ndarray)):
        return tabulated(spec, n, require_positive)
    text = str(spec).strip()
    m = _MONO.match(text)
    if m:
        return monomial(int(m.group(1)), n)
    if text.startswith("table:"):
        try:
            table = json.loads(text[len("table:"):])
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse basis table {text!r}: {exc}") from None
        if not isinstance(table, list):
            raise ConfigError("basis table must be a JSON list")
        return tabulated(table, n, require_positive)
    raise ConfigError(f"unknown basis descriptor {text!r}")


def parse_bases(descriptors, n: int) -> list[BasisFunction]:
    """Expand descriptors, including the ``affine`` and ``poly:<d>`` shorthands."""
    if isinstance(descriptors, str):
        descriptors = [descriptors]
    out: list[BasisFunction] = []
    for desc in descriptors:
        text = str(desc).strip()
        if text == "affine":
            out += [monomial(0, n), monomial(1, n)]
            continue
        m = _POLY.match(text)
        if m:
            out += [monomial(d, n) for d in range(int(m.group(1)) + 1)]
            continue
        out.append(make_basis(desc, n))
    return out


@dataclass(frozen=True, eq=False)
class GameClass:
    n: int
    bases: tuple[BasisFunction, ...]

    def __post_init__(self):
        if int(self.n) < 1:
            raise ConfigError("n must be >= 1")
        bases = tuple(self.bases)
        if not bases:
            raise ConfigError("a game class needs at least one basis")
        for b in bases:
            if b.n != self.n:
                raise ConfigError(f"basis {b.label()} tabulated for n={b.n}, class has n={self.n}")
        object.__setattr__(self, "bases", bases)

    @classmethod
    def from_descriptors(cls, descriptors, n: int) -> "GameClass":
        return cls(n, tuple(parse_bases(descriptors, n)))

    @property
    def m(self) -> int:
        return len(self.bases)

    def labels(self) -> list[str]:
        return [b.label() for b in self.bases]


@dataclass(frozen=True, eq=False)
class Mechanism:
    """Perturbed costs ``F_j(1..n)``, stored as one array per basis."""

    per_basis_F: tuple[np.ndarray, ...]

    def __post_init__(self):
        arrs = tuple(_frozen(f) for f in self.per_basis_F)
        for f in arrs:
            if f.ndim != 1 or len(f) < 1:
                raise ConfigError("each F_j must be a nonempty 1-d table")
            if not np.all(np.isfinite(f)):
                raise ConfigError("mechanism values must be finite")
        object.__setattr__(self, "per_basis_F", arrs)

    @property
    def n(self) -> int:
        return len(self.per_basis_F[0])

    def check(self, cls: GameClass) -> None:
        if len(self.per_basis_F) != cls.m:
            raise ConfigError(f"mechanism has {len(self.per_basis_F)} tables, class has {cls.m} bases")
        for f in self.per_basis_F:
            if len(f) != cls.n:
                raise ConfigError(f"mechanism table of length {len(f)}, class has n={cls.n}")

    def padded(self, j: int) -> np.ndarray:
        """F_j on loads ``0..n+1`` with zeros at both ends."""
        return np.concatenate(([0.0], self.per_basis_F[j], [0.0]))

    def tolls(self, cls: GameClass) -> list[np.ndarray]:
        self.check(cls)
        return [f - b.values[1 : cls.n + 1] for f, b in zip(self.per_basis_F, cls.bases)]


def no_incentive_mechanism(cls: GameClass) -> Mechanism:
    return Mechanism(tuple(b.values[1 : cls.n + 1].copy() for b in cls.bases))


def marginal_cost_values(b: BasisFunction, n: int) -> np.ndarray:
    x = np.arange(1, n + 1)
    return x * b.values[1 : n + 1] - (x - 1) * b.values[0:n]


def marginal_cost_mechanism(cls: GameClass) -> Mechanism:
    """``F_j(x) = x b_j(x) - (x-1) b_j(x-1)``: each user pays its externality."""
    for b in cls.bases:
        if not (b.positive and b.nondecreasing):
            raise ConfigError(f"marginal-cost mechanism needs positive nondecreasing bases, got {b.label()}")
    return Mechanism(tuple(marginal_cost_values(b, cls.n) for b in cls.bases))


class IndexTriplet(NamedTuple):
    x: int
    y: int
    z: int


def index_array(n: int, mode: str = "full") -> np.ndarray:
    """Constraint triplets as an ``(k, 3)`` int array, sorted lexicographically.

    ``full``: all (x, y, z) with ``1 <= x+y-z <= n`` and ``z <= min(x, y)``.
    ``reduced``: one triplet per pair (x, y) with ``z = max(0, x+y-n)``; only
    valid when F is nondecreasing.
    ``extreme``: per pair, the two extreme admissible overlaps. Each row is
    affine in z, so this set is exactly equivalent to ``full`` for any F.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    g = np.arange(n + 1)
    x, y = np.meshgrid(g, g, indexing="ij")
    x, y = x.ravel(), y.ravel()
    keep = x + y > 0
    x, y = x[keep], y[keep]
    zmin = np.maximum(0, x + y - n)
    if mode == "reduced":
        return np.stack([x, y, zmin], axis=1)
    if mode == "extreme":
        zmax = np.minimum(np.minimum(x, y), x + y - 1)
        out = [np.stack([x, y, zmin], axis=1)]
        more = zmax > zmin
        out.append(np.stack([x[more], y[more], zmax[more]], axis=1))
        trip = np.concatenate(out)
        order = np.lexsort((trip[:, 2], trip[:, 1], trip[:, 0]))
        return trip[order]
    if mode == "full":
        x3, y3, z3 = np.meshgrid(g, g, g, indexing="ij")
        x3, y3, z3 = x3.ravel(), y3.ravel(), z3.ravel()
        s = x3 + y3 - z3
        ok = (s >= 1) & (s <= n) & (z3 <= np.minimum(x3, y3))
        return np.stack([x3[ok], y3[ok], z3[ok]], axis=1)
    raise ConfigError(f"unknown index mode {mode!r}")


def index_set(n: int, reduced: bool = False) -> list[IndexTriplet]:
    arr = index_array(n, "reduced" if reduced else "full")
    return [IndexTriplet(int(a), int(b), int(c)) for a, b, c in arr]
