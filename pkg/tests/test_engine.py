from __future__ import annotations

import itertools

import numpy as np
import pytest

from congestion_tolls import engine
from congestion_tolls.engine import Game, Resource
from congestion_tolls.errors import CapExceeded, ConfigError
from congestion_tolls.model import marginal_cost_values, monomial


def _affine(n):
    x = np.arange(1, n + 1, dtype=float)
    return Resource(x, np.zeros(n))


def classic_affine_instance() -> Game:
    """Three users, six unit-slope resources; the all-second-action profile costs 15 against 6."""
    h, g = [0, 1, 2], [3, 4, 5]
    users = []
    for i in range(3):
        a = frozenset({h[i], g[i]})
        b = frozenset({h[(i + 1) % 3], h[(i + 2) % 3], g[(i + 1) % 3]})
        users.append((a, b))
    return Game(tuple(users), tuple(_affine(3) for _ in range(6)))


def test_single_user_metrics():
    game = Game(((frozenset({0}), frozenset({1})),), (Resource([2.0], [0.0]), Resource([3.0], [0.0])))
    m = engine.exact_metrics(game)
    assert (m.poa, m.pos, m.posa) == (1.0, 1.0, 1.0)
    assert m.min_cost == 2.0


def test_classic_affine_worst_case():
    m = engine.exact_metrics(classic_affine_instance())
    assert m.min_cost == 6.0
    assert m.poa == pytest.approx(2.5)
    assert (1, 1, 1) in m.equilibria


def test_social_cost_excludes_tolls():
    game = Game(((frozenset({0}),), (frozenset({0}),)), (Resource([1.0, 2.0], [5.0, 7.0]),))
    assert engine.social_cost(game, (0, 0)) == 4.0
    assert engine.user_cost(game, (0, 0), 0) == 9.0
    assert engine.rosenthal_potential(game, (0, 0)) == 6.0 + 9.0


def test_json_round_trip():
    game = classic_affine_instance()
    again = Game.from_json(game.dumps({"kind": "classic"}))
    assert again.to_json() == game.to_json()


@pytest.mark.parametrize(
    "doc",
    [
        "{not json",
        '{"users": []}',
        '{"users": [[[0]]], "resources": []}',
        '{"users": [[[0]]], "resources": [{"ell": [1, 2]}], "x": 1, "extra": 2}'.replace('[1, 2]', '"a"'),
        '{"users": [[[0]], [[0]]], "resources": [{"ell": [1], "tau": [0]}]}',
    ],
)
def test_schema_violations(doc):
    with pytest.raises(ConfigError):
        Game.from_json(doc)


def test_cap_exceeded():
    game = Game(tuple((frozenset({0}), frozenset({1})) for _ in range(4)), (_affine(4), _affine(4)))
    with pytest.raises(CapExceeded):
        engine.enumerate_pure_nash(game, cap=8)


def test_best_response_from_equilibrium_is_trivial():
    game = classic_affine_instance()
    path = engine.best_response_path(game, (0, 0, 0))
    assert path.path == ((0, 0, 0),) and path.converged


def test_best_response_decreases_potential():
    rng = np.random.default_rng(7)
    for _ in range(30):
        game = engine.random_game(rng)
        start = tuple(int(rng.integers(len(a))) for a in game.users)
        res = engine.best_response_path(game, start)
        assert res.converged
        phis = [engine.rosenthal_potential(game, a) for a in res.path]
        assert all(b < a for a, b in zip(phis, phis[1:]))
        assert res.path[-1] in engine.enumerate_pure_nash(game)


def test_best_response_step_limit_is_reported():
    game = classic_affine_instance()
    with pytest.raises(ConfigError):
        engine.best_response_path(game, (1, 1, 1), max_steps=0)


def test_worst_case_game_single_user():
    b = monomial(1, 1)
    game = engine.build_worst_case_game_poa(b, [1.0], 1, 1e-3)
    assert engine.exact_metrics(game).pos == 1.0


def test_worst_case_game_degenerate():
    # a steep F makes y* = n the unique maximizer
    b = monomial(1, 3)
    with pytest.raises(ConfigError):
        engine.build_worst_case_game_poa(b, [1.0, 10.0, 100.0], 3, 1e-3)


def test_worst_case_game_unique_for_large_eps():
    b = monomial(1, 4)
    F = marginal_cost_values(b, 4)
    for eps in (1e-3, 1.0, 10.0):
        game = engine.build_worst_case_game_poa(b, F, 4, eps)
        assert len(engine.enumerate_pure_nash(game)) == 1


def test_eps_must_exceed_tie_tolerance():
    b = monomial(1, 3)
    with pytest.raises(ConfigError):
        engine.build_lower_bound_game(b, [1.0, 2.0, 3.0], 3, 1, 5e-9)


def test_lower_bound_game_trivial():
    b = monomial(1, 1)
    for eps in (1e-3, 1e-5):
        game = engine.build_lower_bound_game(b, [1.0], 1, 0, eps)
        m = engine.exact_metrics(game)
        assert m.pos == 1.0 and len(m.equilibria) == 1


def test_lower_bound_game_from_any_start_settles():
    b = monomial(1, 5)
    F = np.array([1.0, 2.5, 3.5, 5.0, 7.0])
    game = engine.build_lower_bound_game(b, F, 5, 2, 1e-3)
    eq = engine.enumerate_pure_nash(game)
    assert eq == [(0,) * 5]
    for start in itertools.product(*[range(len(a)) for a in game.users]):
        assert engine.best_response_path(game, start).path[-1] == eq[0]


def test_deviation_game_marginal_cost_is_efficient():
    ell = monomial(1, 4)
    for k in (1, 2, 4):
        for direction in ("above", "below"):
            game = engine.build_pos_deviation_game(ell, k, 1e-3, direction)
            assert engine.exact_metrics(game).pos == pytest.approx(1.0)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_deviation_game_detects_toll_above_marginal_cost(k):
    ell = monomial(1, 4)
    eps = 1e-3
    tau = marginal_cost_values(ell, k) - ell.values[1 : k + 1]
    tau[k - 1] += 2 * eps
    m = engine.exact_metrics(engine.build_pos_deviation_game(ell, k, eps, "above", tau))
    lk = ell.at(k) * k
    assert m.pos == pytest.approx((lk + eps) / lk, rel=1e-12)
    assert len(m.equilibria) == 1


@pytest.mark.parametrize("k", [2, 3])
def test_deviation_game_detects_toll_below_marginal_cost(k):
    ell = monomial(2, 4)
    eps = 1e-3
    tau = marginal_cost_values(ell, k) - ell.values[1 : k + 1]
    tau[k - 1] -= 2 * eps
    m = engine.exact_metrics(engine.build_pos_deviation_game(ell, k, eps, "below", tau))
    lk = ell.at(k) * k
    assert m.pos == pytest.approx(lk / (lk - eps), rel=1e-12)


def test_deviation_game_eps_range():
    ell = monomial(1, 3)
    tau = marginal_cost_values(ell, 3) - ell.values[1:4]
    tau[2] += 1e-3
    with pytest.raises(ConfigError):
        engine.build_pos_deviation_game(ell, 3, 1e-2, "above", tau)
    with pytest.raises(ConfigError):
        engine.build_pos_deviation_game(ell, 3, 1e-4, "sideways", tau)


def test_lexicographic_potential_tie_break():
    # two identical resources: both single-user assignments tie
    game = Game(((frozenset({0}), frozenset({1})),), (Resource([1.0], [0.0]), Resource([1.0], [0.0])))
    assert engine.exact_metrics(game).potential_minimizer == (0,)
