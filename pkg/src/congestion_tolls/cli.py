"""Command-line entry point: ``congestion-tolls <command> [flags]``.

Exit codes: 0 success, 1 configuration or input error, 2 solver error.
Scalars print with 6 decimals; ``--format json`` gives full precision.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import asymptotic, engine, frontier, poa
from .errors import ConfigError, InfeasibleAlpha, TollError
from .model import GameClass, make_basis, marginal_cost_values

# printed values are rounded, so alphas this close below the minimum PoA are snapped to it
SNAP_REL = 1e-4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_grid(text: str) -> list[float]:
    """``lo:hi:step`` inclusive of ``hi`` up to rounding; must be strictly increasing."""
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"alpha grid must be lo:hi:step, got {text!r}") from None
    if not (step > 0 and hi >= lo and math.isfinite(hi)):
        raise ConfigError(f"alpha grid {text!r} is not strictly increasing")
    count = int(math.floor((hi - lo) / step + 1e-9))
    grid = [round(lo + k * step, 12) for k in range(count + 1)]
    if hi - grid[-1] > 1e-9 * max(1.0, abs(hi)):
        grid.append(hi)
    return grid


def _fmt(v) -> str:
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return f"{float(v):.6f}"


def _round(obj):
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else round(obj, 6)
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _emit(args, scalar, doc: dict, scalar_text: str | None = None) -> None:
    """Scalar to stdout (or full JSON with --format json); JSON document to --out."""
    body = json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(body)
    if args.format == "json":
        sys.stdout.write(body)
    else:
        print(scalar_text if scalar_text is not None else _fmt(scalar))


def _class(args) -> GameClass:
    if args.n is None or args.n < 1:
        raise ConfigError("--n must be given and >= 1")
    return GameClass.from_descriptors(args.basis or ["affine"], args.n)


def _search(args) -> frontier.KappaSearch:
    return frontier.KappaSearch(max_evals=args.kappa_evals)


def _alpha(args, cls: GameClass) -> float:
    if args.alpha is None:
        raise ConfigError("--alpha is required")
    return _snap(args.alpha, frontier.min_achievable_poa(cls))


def _snap(alpha: float, min_poa: float) -> float:
    if alpha < min_poa:
        if alpha >= (1.0 - SNAP_REL) * min_poa:
            return min_poa
        raise InfeasibleAlpha(alpha, min_poa)
    return alpha


# --- commands ----------------------------------------------------------------


def cmd_poa_opt(args) -> int:
    cert = poa.optimal_poa_mechanism(_class(args))
    _emit(args, cert.poa, cert.to_json())
    return 0


def cmd_mc_poa(args) -> int:
    cert = poa.marginal_cost_poa(_class(args))
    _emit(args, cert.poa, cert.to_json())
    return 0


def cmd_frontier(args) -> int:
    cls = _class(args)
    if not args.alpha_grid:
        raise ConfigError("--alpha-grid lo:hi:step is required")
    grid = parse_grid(args.alpha_grid)
    min_poa = frontier.min_achievable_poa(cls)
    grid = sorted({_snap(a, min_poa) for a in grid})
    jobs = args.jobs or os.cpu_count() or 1
    points = frontier.sweep_frontier(cls, grid, _search(args), jobs=jobs)
    for p in points:
        if p.error:
            print(f"alpha={p.alpha:.6f}: {p.error}", file=sys.stderr)
    if args.format == "json":
        body = json.dumps(_json_safe([p.__dict__ for p in points]), indent=2) + "\n"
    else:
        body = frontier.frontier_csv(points)
    if args.out:
        Path(args.out).write_text(body)
    else:
        sys.stdout.write(body)
    return 2 if all(p.error for p in points) else 0


def cmd_bound_upper(args) -> int:
    cls = _class(args)
    cert = frontier.pos_upper_bound(cls, _alpha(args, cls), _search(args))
    _emit(args, cert.pos, cert.to_json())
    return 0


def cmd_bound_lower(args) -> int:
    cls = _class(args)
    cert = frontier.pos_lower_bound(cls, _alpha(args, cls))
    _emit(args, cert.pos, cert.to_json())
    return 0


def cmd_pos_target(args) -> int:
    if args.pos_target is None:
        raise ConfigError("--pos-target is required")
    cert = frontier.min_poa_for_pos_target(_class(args), args.pos_target, _search(args))
    _emit(args, cert.alpha, cert.to_json())
    return 0


def _degree(args) -> int:
    basis = args.basis or ["monomial:1"]
    if len(basis) != 1 or not str(basis[0]).startswith("monomial:"):
        raise ConfigError("asymptotic mode takes a single monomial:<d> basis")
    try:
        return int(str(basis[0]).split(":", 1)[1])
    except ValueError:
        raise ConfigError(f"bad basis descriptor {basis[0]!r}") from None


def cmd_asymptotic(args) -> int:
    d = _degree(args)
    if args.pos_target is not None:
        ext = asymptotic.min_poa_for_pos_target_asymptotic(d, args.pos_target, args.nbar, args.epsilon)
        text = f"{_fmt(ext.poa_star)} {_fmt(ext.pos_bound)}"
    else:
        poa_star = args.alpha if args.alpha is not None else math.inf
        ext = asymptotic.solve_asymptotic_program(d, args.nbar, poa_star, args.epsilon)
        text = f"{_fmt(ext.poa_bound)} {_fmt(ext.pos_bound)}"
    _emit(args, None, ext.to_json(), text)
    return 0


def _single_basis(args, n: int):
    basis = args.basis or ["monomial:1"]
    if len(basis) != 1 or basis[0] in ("affine",) or str(basis[0]).startswith("poly:"):
        raise ConfigError("construct takes a single basis descriptor")
    return make_basis(basis[0], n)


def cmd_construct(args) -> int:
    eps = args.epsilon
    header = {"kind": args.kind, "epsilon": eps}
    if args.kind == "random":
        rng = np.random.default_rng(args.seed)
        game = engine.random_game(rng)
        header["seed"] = args.seed
    elif args.kind == "worst-poa":
        n = args.n or 4
        b = _single_basis(args, n)
        cert = poa.optimal_poa_mechanism(GameClass(n, (b,)))
        F = cert.mechanism.per_basis_F[0]
        game = engine.build_worst_case_game_poa(b, F, n, eps)
        header.update(basis=b.label(), n=n, poa=cert.poa, F=F.tolist())
    elif args.kind == "lower-bound":
        n = args.n or 5
        b = _single_basis(args, n)
        cls = GameClass(n, (b,))
        cert = frontier.pos_lower_bound(cls, _alpha(args, cls))
        u, v = cert.argmin
        u = args.u if args.u is not None else u
        v = args.v if args.v is not None else v
        F = cert.mechanism.per_basis_F[0]
        game = engine.build_lower_bound_game(b, F, u, v, eps)
        header.update(basis=b.label(), n=n, alpha=cert.alpha, u=u, v=v, pos_lower=cert.pos, F=F.tolist())
    else:
        n = args.n or max(args.k or 1, 1)
        k = args.k or n
        b = _single_basis(args, max(n, k))
        tau = None
        if args.toll_offset:
            tau = marginal_cost_values(b, k) - b.values[1 : k + 1]
            tau[k - 1] += args.toll_offset
        game = engine.build_pos_deviation_game(b, k, eps, args.direction, tau)
        header.update(basis=b.label(), k=k, direction=args.direction, toll_offset=args.toll_offset)
    body = game.dumps(_json_safe(header)) + "\n"
    if args.out:
        Path(args.out).write_text(body)
    else:
        sys.stdout.write(body)
    return 0


def cmd_verify(args) -> int:
    try:
        text = Path(args.game).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read game file: {exc}") from None
    game = engine.Game.from_json(text)
    metrics = engine.exact_metrics(game, cap=args.cap)
    doc = metrics.to_json()
    out = doc if args.format == "json" else _round(doc)
    body = json.dumps(_json_safe(out), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(body)
    sys.stdout.write(body)
    return 0


COMMANDS = {
    "poa-opt": (cmd_poa_opt, "PoA-optimal local mechanism"),
    "mc-poa": (cmd_mc_poa, "PoA of the marginal-cost mechanism"),
    "frontier": (cmd_frontier, "upper and lower PoS bounds over an alpha grid (CSV)"),
    "bound-upper": (cmd_bound_upper, "upper PoS bound at one PoA level"),
    "bound-lower": (cmd_bound_lower, "lower PoS bound at one PoA level"),
    "pos-target": (cmd_pos_target, "smallest PoA level meeting a PoS target"),
    "asymptotic": (cmd_asymptotic, "mechanism extended to any number of users (monomial bases)"),
    "construct": (cmd_construct, "emit a constructed game as JSON"),
    "verify": (cmd_verify, "exact equilibrium analysis of a game JSON file"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="congestion-tolls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--basis", nargs="+", help="monomial:<d>, affine, poly:<d> or table:[v1,...]")
        p.add_argument("--n", type=int, help="maximum number of users")
        p.add_argument("--alpha", type=float, help="PoA level")
        p.add_argument("--alpha-grid", help="lo:hi:step")
        p.add_argument("--pos-target", type=float)
        p.add_argument("--nbar", type=int, default=50)
        p.add_argument("--epsilon", type=float, default=1e-6)
        p.add_argument("--kappa-evals", type=int, default=40, help="golden-section budget of the kappa search")
        p.add_argument("--out", help="write the certificate or data to this path")
        p.add_argument("--format", choices=("text", "csv", "json"), default="text")
        p.add_argument("--jobs", type=int, default=0, help="worker threads (0: all cores)")
        p.add_argument("--seed", type=int, default=0)
        if name == "construct":
            p.add_argument("--kind", choices=("worst-poa", "lower-bound", "pos-deviation", "random"), required=True)
            p.add_argument("--u", type=int)
            p.add_argument("--v", type=int)
            p.add_argument("--k", type=int)
            p.add_argument("--direction", choices=("above", "below"), default="above")
            p.add_argument("--toll-offset", type=float, default=0.0, help="added to the marginal-cost toll at load k")
            p.set_defaults(epsilon=1e-3)
        if name == "verify":
            p.add_argument("game", help="path to a game JSON file")
            p.add_argument("--cap", type=int, default=engine.DEFAULT_CAP)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command][0](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TollError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
