from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bicomb_lab.core import (
    ConvexityModulus,
    PropertyReport,
    check_a_convex,
    check_bicombing_axioms,
    check_consistent,
    check_equivariant,
    check_length_modulus,
    endpoint_convergence_check,
    identity_length_modulus,
    linear_modulus,
    monotonize_modulus,
    product_space,
    sample_map,
    scaled_modulus,
)
from bicomb_lab.errors import ConfigurationError, DomainError, PreconditionError
from bicomb_lab.spaces import (
    euclidean_space,
    frozen_bicombing_space,
    get_space,
    h2_space,
    non_isometry_space,
    quadratic_speed_space,
)


@pytest.fixture(scope="module")
def h2():
    return h2_space()


@pytest.mark.parametrize("name", ["euclidean2", "euclidean3", "h2"])
def test_axiom_suite_passes(name):
    space = get_space(name)
    assert check_bicombing_axioms(space, 300, seed=1).passed
    assert check_consistent(space, 300, seed=1).passed
    assert check_equivariant(space, 300, seed=1).passed
    assert check_a_convex(space, linear_modulus(), 300, seed=1).passed
    assert check_length_modulus(space, identity_length_modulus(), 300, seed=1).passed
    assert endpoint_convergence_check(space, linear_modulus(), 200, seed=1).passed


def test_negative_controls_fail():
    assert not check_bicombing_axioms(frozen_bicombing_space(), 50).passed
    assert not check_bicombing_axioms(quadratic_speed_space(), 50).passed
    rep = check_equivariant(non_isometry_space(), 50)
    assert not rep.passed
    assert rep.witness["isometry"] == "dilate2"


def test_half_linear_modulus_fails_on_h2(h2):
    rep = check_a_convex(h2, scaled_modulus(linear_modulus(), 0.5), 200)
    assert not rep.passed
    assert rep.witness["lhs"] > rep.witness["rhs"]


def test_report_json_round_trip(h2):
    rep = check_bicombing_axioms(h2, 20, seed=3)
    d = json.loads(rep.to_json())
    assert d["check"] == "bicombing_axioms"
    assert d["passed"] is True
    assert d["n"] == 20 and d["seed"] == 3
    assert len(d["extra"]["violations"]) == 20


def test_report_pass_is_tolerance_comparison():
    assert PropertyReport("c", "s", 0, 1, 1e-9, 1e-9, None, 1).passed
    assert not PropertyReport("c", "s", 0, 1, 1e-9, 2e-9, None, 1).passed


def test_sample_map_is_worker_independent():
    def task(rng, i):
        return float(rng.random()) + i

    assert sample_map(task, 40, 7, workers=1) == sample_map(task, 40, 7, workers=3)


def test_reports_identical_across_workers(h2):
    a = check_a_convex(h2, linear_modulus(), 60, seed=5, workers=1)
    b = check_a_convex(h2, linear_modulus(), 60, seed=5, workers=2)
    assert a.to_json() == b.to_json()


def test_modulus_domain():
    A = linear_modulus()
    with pytest.raises(DomainError):
        A(1.5, 1, 1)
    with pytest.raises(DomainError):
        A(0.5, -1, 1)
    with pytest.raises(DomainError):
        identity_length_modulus()(-0.1)


@given(st.floats(0, 1), st.floats(0, 5), st.floats(0, 5))
def test_linear_modulus_boundary_values(t, s, s2):
    A = linear_modulus()
    assert A(0.0, s, s2) == s
    assert A(1.0, s, s2) == s2
    assert min(s, s2) - 1e-12 <= A(t, s, s2) <= max(s, s2) + 1e-12


def test_monotonize():
    # a modulus that dips in s: the monotone envelope must not
    wobbly = ConvexityModulus(lambda t, s, s2: (1 - t) * abs(math.sin(s)) + t * s2, name="wobbly")
    M = monotonize_modulus(wobbly, resolution=48, s_max=10.0)
    assert M.monotone_flags[:2] == (True, True)
    grid = np.linspace(0, 10, 30)
    for t in (0.0, 0.3, 0.8):
        vals = [M(t, float(s), 1.0) for s in grid]
        assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
        for s in grid:
            assert M(t, float(s), 1.0) >= wobbly(t, float(s), 1.0) - 1e-12
    # the t-shape forces a non-increasing tail on [2/3, 1]: linear (0, 5) is lifted to its value at t = 1
    L = monotonize_modulus(linear_modulus())
    assert L(0.8, 0.0, 5.0) == 5.0
    assert L(0.0, 0.0, 0.0) == 0.0
    assert L(1.0, 0.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        L(0.5, 11.0, 0.0)


def test_product_space_axioms(h2):
    space, Abar = product_space(euclidean_space(2), linear_modulus(), h2, linear_modulus())
    assert check_bicombing_axioms(space, 200).passed
    assert check_consistent(space, 200).passed
    assert check_equivariant(space, 100).passed
    assert check_a_convex(space, Abar, 300).passed
    t, s, s2 = 0.3, 1.0, 2.0
    assert Abar(t, s, s2) == pytest.approx(math.hypot(linear_modulus()(t, s, s2), linear_modulus()(t, s, s2)))


def test_product_needs_monotone_moduli(h2):
    bad = ConvexityModulus(lambda t, s, s2: s + s2, (False, True, False))
    with pytest.raises(PreconditionError):
        product_space(euclidean_space(2), bad, h2, linear_modulus())


def test_unknown_space():
    with pytest.raises(ConfigurationError):
        get_space("no-such-space")


def test_equivariant_needs_isometries():
    with pytest.raises(ConfigurationError):
        check_equivariant(frozen_bicombing_space(), 5)
