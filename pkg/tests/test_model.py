from __future__ import annotations

import numpy as np
import pytest

from congestion_tolls.errors import ConfigError
from congestion_tolls.model import (
    GameClass,
    index_array,
    make_basis,
    marginal_cost_values,
    monomial,
    no_incentive_mechanism,
    parse_bases,
    tabulated,
)


def test_monomial_values_and_flags():
    b = monomial(2, 5)
    assert b.values[0] == 0.0
    assert b.at(3) == 9.0
    assert b.at(-1) == 0.0 and b.at(100) == 0.0
    assert b.positive and b.nondecreasing and b.convex
    assert np.allclose(b.weighted()[:4], [0, 1, 8, 27])


def test_constant_basis_is_convex_and_nondecreasing():
    b = monomial(0, 4)
    assert b.at(1) == 1.0 and b.at(4) == 1.0
    assert b.convex and b.nondecreasing


def test_descriptor_sugar():
    assert [b.label() for b in parse_bases(["affine"], 3)] == [monomial(0, 3).label(), monomial(1, 3).label()]
    assert len(parse_bases(["poly:3"], 3)) == 4
    tb = make_basis("table:[1, 2, 4, 8, 16]", 3)
    assert tb.at(3) == 4.0


def test_table_too_short_is_rejected():
    with pytest.raises(ConfigError):
        tabulated([1.0, 2.0], 4)


def test_bad_descriptors():
    for bad in ["monomial:x", "cubic", "table:[1,2", "monomial:-1"]:
        with pytest.raises(ConfigError):
            make_basis(bad, 3)


def test_nonconvex_table_flag():
    b = tabulated([1.0, 3.0, 4.0, 4.5, 4.6], 4)
    assert b.nondecreasing and not b.convex


def test_marginal_cost_values_affine():
    b = monomial(1, 4)
    # mc(x) = x b(x) - (x-1) b(x-1) = 2x - 1
    assert np.allclose(marginal_cost_values(b, 4), [1, 3, 5, 7])


def test_mechanism_shape_checked():
    cls = GameClass.from_descriptors(["affine"], 3)
    mech = no_incentive_mechanism(cls)
    mech.check(cls)
    other = GameClass.from_descriptors(["affine"], 4)
    with pytest.raises(ConfigError):
        mech.check(other)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_index_sets_are_nested(n):
    full = {tuple(r) for r in index_array(n, "full")}
    reduced = {tuple(r) for r in index_array(n, "reduced")}
    extreme = {tuple(r) for r in index_array(n, "extreme")}
    assert reduced <= extreme <= full
    for x, y, z in full:
        assert 0 <= z <= min(x, y) and x + y - z <= n and x + y > 0
