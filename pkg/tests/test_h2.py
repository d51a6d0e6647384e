from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicomb_lab.errors import DomainError
from bicomb_lab.h2 import (
    H2Path,
    H2Point,
    Mobius,
    geodesic_path,
    h2_direction,
    h2_distance,
    h2_exp,
    h2_geodesic,
    h2_transport,
    holonomy_check,
    max_area_g,
    oriented_area,
    parallel_transport_drift,
    random_h2_point,
    shoot_upward,
    triangle_area,
)


def acosh_distance(p, q):
    """Textbook formula, used as the independent oracle."""
    (x1, y1), (x2, y2) = p, q
    return math.acosh(1 + ((x1 - x2) ** 2 + (y1 - y2) ** 2) / (2 * y1 * y2))


def cosine_law_area(p, q, r):
    """Angle defect from the plain hyperbolic law of cosines."""
    a, b, c = acosh_distance(q, r), acosh_distance(p, r), acosh_distance(p, q)

    def ang(opp, s1, s2):
        cos = (math.cosh(s1) * math.cosh(s2) - math.cosh(opp)) / (math.sinh(s1) * math.sinh(s2))
        return math.acos(min(1.0, max(-1.0, cos)))

    return math.pi - ang(a, b, c) - ang(b, a, c) - ang(c, a, b)


coord = st.floats(-3, 3)
height = st.floats(0.2, 5)
points = st.builds(H2Point.from_xy, coord, height)


def test_unit_vertical_distance_and_midpoint():
    p, q = H2Point.from_xy(0, 1), H2Point.from_xy(0, math.e)
    assert h2_distance(p, q) == pytest.approx(1.0, abs=1e-15)
    m = h2_geodesic(p, q, 0.5)
    assert m.x == pytest.approx(0.0, abs=1e-15)
    assert m.y == pytest.approx(math.sqrt(math.e), rel=1e-15)


def test_frozen_distance():
    # 40-digit acosh oracle
    assert h2_distance(H2Point.from_xy(0, 1), H2Point.from_xy(3, 2)) == pytest.approx(1.9248473002384138, rel=1e-14)


@given(points, points)
def test_distance_matches_acosh_oracle(p, q):
    want = acosh_distance((p.x, p.y), (q.x, q.y))
    assert h2_distance(p, q) == pytest.approx(want, rel=1e-9, abs=1e-7)


@given(points, points)
def test_distance_symmetric(p, q):
    assert h2_distance(p, q) == pytest.approx(h2_distance(q, p), rel=1e-14, abs=1e-15)


@given(points, points, st.floats(0, 1))
def test_geodesic_constant_speed(p, q, t):
    d = h2_distance(p, q)
    c = h2_geodesic(p, q, t)
    assert h2_distance(p, c) == pytest.approx(t * d, abs=1e-10)
    assert h2_distance(c, q) == pytest.approx((1 - t) * d, abs=1e-10)


@given(points, points)
def test_exp_inverts_direction(p, q):
    back = h2_exp(p, h2_distance(p, q), h2_direction(p, q))
    assert h2_distance(back, q) < 1e-9


@given(points, points, st.sampled_from([Mobius.translation(0.7, -2.0, 3.0), Mobius(1.0, 1.0, 0.0, 1.0),
                                        Mobius.translation(1.3)]))
def test_mobius_isometry(p, q, m):
    assert h2_distance(m(p), m(q)) == pytest.approx(h2_distance(p, q), abs=1e-10)


def test_mobius_rejects_bad_determinant():
    with pytest.raises(DomainError):
        Mobius(1.0, 1.0, 1.0, 1.0)


def test_mobius_inverse_and_compose():
    m = Mobius.translation(0.7, -2.0, 3.0)
    p = H2Point.from_xy(0.3, 1.7)
    assert h2_distance(m.inverse()(m(p)), p) < 1e-12
    assert h2_distance(m.compose(m)(p), m(m(p))) < 1e-12


def test_frozen_triangle_area():
    p, q, r = H2Point.from_xy(-1, 1), H2Point.from_xy(1, 1), H2Point.from_xy(0, 2.5)
    # 40-digit cosine-law oracle
    assert triangle_area(p, q, r) == pytest.approx(0.4575976907744512, abs=1e-13)
    assert oriented_area(p, q, r) > 0
    assert oriented_area(p, r, q) == pytest.approx(-oriented_area(p, q, r), abs=1e-15)


@settings(max_examples=50)
@given(points, points, points)
def test_area_matches_cosine_law(p, q, r):
    sides = [h2_distance(p, q), h2_distance(q, r), h2_distance(r, p)]
    if min(sides) < 1e-2:
        return
    want = cosine_law_area((p.x, p.y), (q.x, q.y), (r.x, r.y))
    assert triangle_area(p, q, r) == pytest.approx(want, abs=1e-6)


def test_transport_zero_along_vertical():
    assert h2_transport(H2Point.from_xy(0, 1), H2Point.from_xy(0, 5)) == pytest.approx(0.0, abs=1e-15)


def test_drift_of_horizontal_segment():
    # int dx / y along y = 1 from x = 0 to 2
    path = H2Path.from_points([H2Point.from_xy(t, 1.0) for t in np.linspace(0, 2, 11)])
    assert parallel_transport_drift(path) == pytest.approx(2.0, abs=1e-12)


def test_holonomy_matches_area():
    p, q, r = H2Point.from_xy(-1, 1), H2Point.from_xy(1, 1), H2Point.from_xy(0, 2.5)
    drift, area, res = holonomy_check(p, q, r, 5000)
    assert drift > 0
    assert res < 1e-6


def test_holonomy_needs_samples():
    p = H2Point.from_xy(0, 1)
    with pytest.raises(DomainError):
        holonomy_check(p, p, p, 3)


def test_geodesic_path_endpoints():
    p, q = H2Point.from_xy(-1, 1), H2Point.from_xy(2, 0.5)
    path = geodesic_path(p, q, 20)
    assert (path.xs[0], math.exp(path.log_ys[-1])) == pytest.approx((-1, 0.5))


def test_g_values():
    assert max_area_g(0.0) == 0.0
    # 40-digit oracle pi - 2 acos(tanh(r/2))
    assert max_area_g(1.0) == pytest.approx(0.9607621582674589, abs=1e-15)
    assert max_area_g(5.0) == pytest.approx(2.8139871378723075, abs=1e-15)
    assert max_area_g(50.0) >= math.pi - 1e-9
    with pytest.raises(DomainError):
        max_area_g(-1.0)


def test_g_bounds_random_triangles():
    rng = np.random.default_rng(4)
    for _ in range(300):
        p, q, r = (random_h2_point(rng, radius=2.5) for _ in range(3))
        a = triangle_area(p, q, r)
        assert a <= min(max_area_g(h2_distance(u, v)) for u, v in ((p, q), (q, r), (r, p))) + 1e-12


def test_far_points_keep_precision():
    p = H2Point(0.0, 0.0)
    q = H2Point(0.0, 1500.0)
    assert h2_distance(p, q) == pytest.approx(1500.0, rel=1e-15)
    m = h2_geodesic(p, q, 0.5)
    assert m.log_y == pytest.approx(750.0, rel=1e-15)


def test_mp_backend_resolves_far_boundary_points():
    with mpmath.workdps(120):
        p = H2Point(mpmath.mpf(0), mpmath.mpf(0))
        q = h2_exp(p, mpmath.mpf(200), mpmath.mpf("0.3"))
        assert abs(h2_distance(p, q) - 200) < mpmath.mpf(10) ** -60
        mid = h2_geodesic(p, q, mpmath.mpf("0.5"))
        assert abs(h2_distance(p, mid) - 100) < mpmath.mpf(10) ** -60


def test_shoot_upward_length():
    rng = np.random.default_rng(0)
    p = H2Point.from_xy(0.4, 0.7)
    for length in (0.5, 3.0, 40.0, 2e4):
        q = shoot_upward(rng, p, length)
        assert h2_distance(p, q) == pytest.approx(length, rel=1e-12)
        assert q.log_y >= p.log_y
