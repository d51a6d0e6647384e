from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicomb_lab.core import (
    ConvexityModulus,
    check_a_convex,
    check_bicombing_axioms,
    check_consistent,
    check_equivariant,
    check_length_modulus,
    endpoint_convergence_check,
)
from bicomb_lab.errors import DomainError
from bicomb_lab.h2 import H2Point, Mobius, h2_distance
from bicomb_lab.sl2 import (
    SLPoint,
    a_convex_upper_lhs,
    area_bound_sweep,
    chain_check_convexity,
    chain_sweep,
    fiber_shift,
    from_strip,
    g_profile_check,
    holonomy_sweep,
    length_difference_check,
    length_difference_sweep,
    lift_isometry,
    sl2_bicombe,
    sl2_convexity_modulus,
    sl2_distance_bounds,
    sl2_length_modulus,
    sl2_modulus_a,
    sl2_modulus_A,
    sl2_modulus_f,
    sl2_modulus_fprime,
    sl2_path_length,
    sl2_sampler,
    sl2_shoot,
    sl2_space,
    strip_coordinates,
)


def metric_length(path, n=4000):
    """Length of ``path: [0,1] -> model`` from ``ds^2 = ds_H^2 + (dtheta + dx/y)^2``, by midpoint sums."""
    ts = np.linspace(0.0, 1.0, n + 1)
    pts = [path(float(t)) for t in ts]
    total = 0.0
    for p, q in zip(pts, pts[1:]):
        base = h2_distance(p.base, q.base)
        ymid = math.exp((p.base.log_y + q.base.log_y) / 2)
        vert = (q.fiber - p.fiber) + (q.base.x - p.base.x) / ymid
        total += math.hypot(base, vert)
    return total


@pytest.fixture(scope="module")
def space():
    return sl2_space()


def sl_points():
    return st.builds(lambda x, y, f: SLPoint(H2Point.from_xy(x, y), f),
                     st.floats(-2, 2), st.floats(0.3, 3), st.floats(-2, 2))


def test_strip_round_trip():
    a = SLPoint(H2Point.from_xy(0.2, 1.1), 0.4)
    b = from_strip(a, 0.7, 1.5, -0.8)
    d, h = strip_coordinates(a, b)
    assert (d, h) == pytest.approx((1.5, -0.8), abs=1e-12)


def test_path_length_matches_metric_integral():
    rng = np.random.default_rng(2)
    for _ in range(5):
        a, b = sl2_sampler(rng, 3.0), sl2_sampler(rng, 3.0)
        want = metric_length(lambda t: sl2_bicombe(a, b, t))
        assert sl2_path_length(a, b) == pytest.approx(want, rel=1e-5)


def test_lifted_isometry_preserves_metric_length():
    a = SLPoint(H2Point.from_xy(-0.5, 0.8), 0.1)
    b = SLPoint(H2Point.from_xy(1.2, 2.0), -0.6)
    for m in (Mobius.translation(0.7, -2.0, 3.0), Mobius(1.0, 1.0, 0.0, 1.0), Mobius.translation(1.1, 0.0, 1.0)):
        g = lift_isometry(m)
        ga, gb = g(a), g(b)
        assert metric_length(lambda t: g(sl2_bicombe(a, b, t))) == pytest.approx(
            metric_length(lambda t: sl2_bicombe(a, b, t)), rel=1e-5)
        assert sl2_path_length(ga, gb) == pytest.approx(sl2_path_length(a, b), abs=1e-12)


def test_pure_fiber_path():
    a = SLPoint(H2Point.from_xy(0.0, 1.0), 0.0)
    b = fiber_shift(0.3)(a)
    assert sl2_path_length(a, b) == pytest.approx(0.3, abs=1e-15)
    lo, hi = sl2_distance_bounds(a, b, mesh=8)
    assert lo == 0.0 and hi <= 0.3 + 1e-12


def test_modulus_values():
    # 30-digit oracle from the defining formula
    assert sl2_modulus_a(0.5, 1.0) == pytest.approx(3.016973399382623, abs=1e-14)
    assert sl2_modulus_a(1.0, 2.0) == pytest.approx(11.636243195167554, abs=1e-13)
    assert sl2_modulus_fprime(1.0) == pytest.approx(4.085050412707718, abs=1e-14)
    assert sl2_modulus_f(1.0) == pytest.approx(8.170100825415436, abs=1e-13)
    assert sl2_modulus_a(0.0, 3.0) == 0.0
    with pytest.raises(DomainError):
        sl2_modulus_a(1.2, 1.0)


@given(st.floats(0, 1), st.floats(0, 5), st.floats(0, 5))
def test_A_orientation(t, x, x2):
    A = sl2_modulus_A(t, x, x2)
    assert A == pytest.approx(sl2_modulus_a(1 - t, x) + sl2_modulus_a(t, x2))
    # at the endpoints A dominates the endpoint distance it has to control
    assert sl2_modulus_A(0.0, x, x2) >= x - 1e-12
    assert sl2_modulus_A(1.0, x, x2) >= x2 - 1e-12


def test_literal_orientation_fails_at_start():
    literal = ConvexityModulus(lambda t, s, s2: sl2_modulus_a(t, s) + sl2_modulus_a(1 - t, s2), name="literal")
    # t = 0, y = y': A would have to dominate d(x, x') but literal gives a(1, 0) = 0
    assert literal(0.0, 1.0, 0.0) == 0.0
    x = SLPoint(H2Point.from_xy(0.0, 1.0), 0.0)
    x2 = SLPoint(H2Point.from_xy(0.6, 1.3), 0.4)
    y = SLPoint(H2Point.from_xy(-1.0, 2.0), 1.0)
    t = 0.0
    lhs = a_convex_upper_lhs(x, y, x2, y, t)
    dx = sl2_path_length(x, x2)
    assert lhs == pytest.approx(dx)
    assert lhs > literal(t, dx, 0.0) + 0.5
    assert lhs <= sl2_convexity_modulus()(t, dx, 0.0)


def test_axiom_suite(space):
    assert check_bicombing_axioms(space, 200).passed
    assert check_consistent(space, 200).passed
    assert check_equivariant(space, 100).passed
    assert check_a_convex(space, sl2_convexity_modulus(), 300, lhs=a_convex_upper_lhs).passed
    assert check_length_modulus(space, sl2_length_modulus(), 300).passed
    assert endpoint_convergence_check(space, sl2_convexity_modulus(), 100).passed
    assert space.mode == "one-sided"


def test_distance_bounds_are_ordered():
    rng = np.random.default_rng(9)
    for _ in range(3):
        a, b = sl2_sampler(rng, 3.0), sl2_sampler(rng, 3.0)
        lo, hi = sl2_distance_bounds(a, b, mesh=16)
        assert lo <= hi <= sl2_path_length(a, b) + 1e-12
        assert lo == pytest.approx(h2_distance(a.base, b.base))


def test_distance_bounds_monotone_in_mesh():
    a = SLPoint(H2Point.from_xy(0.0, 1.0), 0.0)
    b = SLPoint(H2Point.from_xy(0.3, 1.2), 6.0)
    _, u8 = sl2_distance_bounds(a, b, mesh=8)
    _, u16 = sl2_distance_bounds(a, b, mesh=16)
    assert u16 <= u8 + 1e-12
    # a long fiber gap is cheaper around a loop than straight up the fiber
    assert u16 < sl2_path_length(a, b)


def test_chain_links_single():
    a = SLPoint(H2Point.from_xy(0.0, 1.0), 0.0)
    b = SLPoint(H2Point.from_xy(0.8, 1.4), 0.5)
    b2 = SLPoint(H2Point.from_xy(0.5, 0.9), -0.2)
    rep = chain_check_convexity(a, b, b2, 0.6)
    assert rep.passed
    assert set(rep.extra["links"]) == {"base", "strip", "modulus"}
    assert rep.extra["links"]["strip"] <= 1e-12
    with pytest.raises(DomainError):
        chain_check_convexity(a, b, b2, 1.5)


@settings(max_examples=40, deadline=None)
@given(sl_points(), sl_points(), sl_points(), st.floats(0, 1))
def test_chain_property(a, b, b2, t):
    assert chain_check_convexity(a, b, b2, t).max_violation <= 1e-6


@settings(max_examples=40, deadline=None)
@given(sl_points(), sl_points(), sl_points())
def test_length_difference_property(a, b, b2):
    assert length_difference_check(a, b, b2).max_violation <= 1e-6


def test_sweeps():
    assert chain_sweep(60, seed=1).passed
    assert length_difference_sweep(60, seed=1).passed
    assert g_profile_check().passed
    assert holonomy_sweep(10, seed=1).passed
    assert area_bound_sweep(300, seed=1).passed


def test_shoot_length():
    rng = np.random.default_rng(0)
    a = SLPoint(H2Point.from_xy(0.1, 0.9), 0.3)
    for length in (0.5, 10.0, 300.0):
        assert sl2_path_length(a, sl2_shoot(rng, a, length)) == pytest.approx(length, rel=1e-9)
