import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geonarrow.metric import (
    Ball,
    MetricDomain,
    as_point,
    distance,
    initial_cover,
    refine_ball,
    round_pow2,
    set_diameter,
)

unit1 = MetricDomain.unit(1)
unit2 = MetricDomain.unit(2)


@pytest.mark.parametrize(
    "a, b, want",
    [((0, 0), (0, 0), 0.0), ((0, 0), (0.3, 0.1), 0.3), ((1, -1), (-1, 1), 2.0)],
)
def test_distance_examples(a, b, want):
    assert distance(a, b) == want


def test_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        distance((0, 0), (0, 0, 0))


def test_point_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_point([0.0, math.nan])


def test_set_diameter_examples():
    b = Ball([0.5], 0.25, unit1)
    assert set_diameter(b, b) == 0.5
    # endpoints {0, 0.5} x {0.5, 1}
    assert set_diameter(Ball([0.25], 0.25, unit1), Ball([0.75], 0.25, unit1)) == 1.0
    c = Ball([0.5, 0.5], 0.5, unit2)
    assert set_diameter(c, c) == 1.0


def test_set_diameter_clips_to_domain():
    # the ball around 0.9 reaches 1.4 but the domain stops at 1
    assert set_diameter(Ball([0.1], 0.5, unit1), Ball([0.9], 0.5, unit1)) == 1.0


@pytest.mark.parametrize("z, want", [(1.0, 1.0), (3.0, 4.0), (5.0, 8.0), (7.0, 8.0), (11.0, 16.0),
                                     (0.3, 0.5), (2.0**-10, 2.0**-10), (4.0000001, 8.0)])
def test_round_pow2(z, want):
    assert round_pow2(z) == want


def test_round_pow2_rejects_nonpositive():
    with pytest.raises(ValueError):
        round_pow2(0.0)


@given(st.floats(min_value=1e-300, max_value=1e300))
def test_round_pow2_is_tight(z):
    r = round_pow2(z)
    assert r >= z and r / 2 < z
    assert math.frexp(r)[0] == 0.5


def test_domain_validation():
    with pytest.raises(ValueError):
        MetricDomain(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    dom = MetricDomain(np.array([0.0, -1.0]), np.array([2.0, 0.5]))
    assert dom.diameter == 2.0 and dom.d == 2


def test_ball_validation():
    with pytest.raises(ValueError):
        Ball([0.5], 0.0, unit1)


def test_initial_cover_unit_interval():
    balls = initial_cover(unit1, 0.25)
    assert [b.center[0] for b in balls] == [0.25, 0.75]
    assert len(initial_cover(unit2, 0.5)) == 1
    with pytest.raises(ValueError):
        initial_cover(unit1, 2.0)


@given(st.integers(1, 6), st.integers(1, 2))
def test_initial_cover_covers(k, d):
    dom = MetricDomain.unit(d)
    r = 2.0**-k
    balls = initial_cover(dom, r)
    assert len(balls) == round(1 / (2 * r)) ** d
    rng = np.random.default_rng(k)
    for x in rng.random((50, d)):
        assert any(b.contains(x) for b in balls)


@given(st.integers(0, 3), st.integers(1, 2), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_refine_ball_children_tile_parent(levels, d, cx, cy):
    dom = MetricDomain.unit(d)
    parent = Ball([cx, cy][:d], 0.25, dom)
    kids = refine_ball(parent, 0.25 / 2**levels, d)
    assert len(kids) == (2**levels) ** d
    lo, hi = parent.box()
    rng = np.random.default_rng(levels)
    for x in lo + (hi - lo) * rng.random((40, d)):
        assert any(k.contains(x) for k in kids)
    for k in kids:
        assert k.radius == 0.25 / 2**levels
        assert parent.contains(k.center)


def test_refine_rejects_non_dyadic_ratio():
    with pytest.raises(ValueError):
        refine_ball(Ball([0.5], 0.5, unit1), 0.3)
    with pytest.raises(ValueError):
        refine_ball(Ball([0.5], 0.5, unit1), 0.25, d=2)
