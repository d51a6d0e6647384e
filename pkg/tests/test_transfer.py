from __future__ import annotations

import dataclasses
import itertools
import math

import numpy as np
import pytest

from bicomb_lab.core import identity_length_modulus, linear_modulus
from bicomb_lab.errors import DomainError, PreconditionError, UnrepresentableError
from bicomb_lab.transfer import (
    HomotopyWord,
    check_homotopy_axioms,
    check_iota_equivariance,
    check_semigroup,
    check_transfer_condition,
    factorizations,
    homotopy_action_eval,
    h2_action,
    iota,
    p_radius_membership,
    retract_H,
    s1_forward_instance,
    s1_witness_check,
    sample_F,
    transfer_constants,
    z2_action,
)

A, F = linear_modulus(), identity_length_modulus()
S_Z2 = ("e", "e1", "E1", "e2", "E2")
S_H2 = ("e", "a", "A", "b", "B")


@pytest.fixture(scope="module")
def z2():
    act = z2_action()
    return act, transfer_constants(act, A, F, S_Z2, 2, 0.1)


@pytest.fixture(scope="module")
def h2():
    act = h2_action()
    return act, transfer_constants(act, A, F, S_H2, 1, 0.1)


def test_word_reduction():
    act = z2_action()
    assert act.same(("e1", "e2", "E1"), ("e2",))
    assert act.inv(("e1", "e2")) == ("E2", "E1")
    hact = h2_action()
    assert hact.reduce(("a", "b", "B", "A", "e")) == ()
    assert not hact.same(("a", "b"), ("b", "a"))


def test_group_action_matches_reduction():
    act = z2_action()
    x = (0.2, -0.7)
    for w in itertools.product(S_Z2, repeat=3):
        dx, dy = act.reduce(w)
        assert act.act(w, x) == pytest.approx((x[0] + dx, x[1] + dy), abs=1e-15)


def test_factorizations_count_z2():
    act = z2_action()
    # brute-force oracle: sum of the three steps equals (1, 0)
    steps = {"e": (0, 0), "e1": (1, 0), "E1": (-1, 0), "e2": (0, 1), "E2": (0, -1)}
    want = sum(1 for w in itertools.product(S_Z2, repeat=3)
               if tuple(map(sum, zip(*(steps[s] for s in w)))) == (1, 0))
    assert len(factorizations(act, ("e1",), S_Z2, 2)) == want == 12


def test_sample_F_unrepresentable(z2):
    act, cfg = z2
    with pytest.raises(UnrepresentableError):
        sample_F(act, cfg.R, ("e1",) * 4, S_Z2, 2, 3)
    words = sample_F(act, cfg.R, ("e1",), S_Z2, 2, 5, seed=1)
    assert all(act.same(w.product(), ("e1",)) for w in words)


def test_homotopy_word_validation():
    with pytest.raises(DomainError):
        HomotopyWord((("e",),), (0.5,))
    with pytest.raises(DomainError):
        HomotopyWord((("e",), ("e",)), (1.5,))


def test_z2_constants(z2):
    act, cfg = z2
    assert cfg.beta_prime == pytest.approx(2.0)
    assert cfg.beta == pytest.approx(6.0)
    assert cfg.target == pytest.approx(0.1 / (math.exp(6.0) * 3))
    assert math.isfinite(cfg.R) and cfg.T < cfg.R
    assert cfg.N == 5


def test_retraction(z2):
    act, cfg = z2
    space, x0, R = act.space, act.base_point, 10.0
    inside = (x0[0] + 3.0, x0[1])
    assert retract_H(space, x0, R, inside, 0.0) == inside
    far = (x0[0] + 30.0, x0[1])
    assert space.dist(x0, retract_H(space, x0, R, far, 0.0)) == pytest.approx(R)
    assert space.dist(x0, retract_H(space, x0, R, far, 0.5)) == pytest.approx(20.0)
    assert retract_H(space, x0, R, far, 1.0) == pytest.approx(far)
    assert p_radius_membership(space, x0, R, inside)
    assert not p_radius_membership(space, x0, R, far)
    with pytest.raises(DomainError):
        retract_H(space, x0, R, far, 1.5)


def test_psi_precondition(z2):
    act, cfg = z2
    far = (cfg.R * 2, 0.0)
    with pytest.raises(PreconditionError):
        homotopy_action_eval(act, cfg.R, HomotopyWord((("e",),), ()), far)


def test_psi_image_in_ball(z2):
    act, cfg = z2
    rng = np.random.default_rng(0)
    for w in sample_F(act, cfg.R, ("e1", "e2"), S_Z2, 2, 10):
        x = act.sphere(rng, act.base_point, cfg.R)
        y = homotopy_action_eval(act, cfg.R, w, x)
        assert act.space.length(act.base_point, y) <= cfg.R * (1 + 1e-12)


def test_z2_axioms_and_semigroup(z2):
    act, cfg = z2
    assert check_homotopy_axioms(act, cfg, 100, seed=1).passed
    assert check_semigroup(act, cfg, 100, seed=1).passed
    assert check_iota_equivariance(act, cfg, 20, seed=1).passed


def test_iota_base_point(z2):
    act, _ = z2
    c = iota(act, ("e1",), (5.0, 5.0))
    assert c(-1.0) == pytest.approx((1.31, 0.17))


def test_z2_transfer_condition(z2):
    act, cfg = z2
    rep = check_transfer_condition(act, A, F, cfg, 40, seed=2)
    assert rep.passed
    assert rep.extra["tau_sources"] == ["witness"]
    for step in rep.witness["steps"]:
        assert step["d_fs"] <= step["bound"] + step["error_bound"]


def test_transfer_fails_with_small_radius(z2):
    act, cfg = z2
    bad = dataclasses.replace(cfg, consts=dataclasses.replace(cfg.consts, r=6.0, T=3.0))
    assert not check_transfer_condition(act, A, F, bad, 20, grid=21).passed


def test_h2_action_suite(h2):
    act, cfg = h2
    assert act.dps >= cfg.R / 2.3
    assert check_homotopy_axioms(act, cfg, 20, seed=1).passed
    assert check_semigroup(act, cfg, 20, seed=1).passed
    rep = check_transfer_condition(act, A, F, cfg, 6, seed=1)
    assert rep.passed
    assert rep.extra["tau_sources"] == ["witness"]


def test_s1_witness_forward(z2):
    act, cfg = z2
    rng = np.random.default_rng(4)
    for _ in range(3):
        gx, hy = s1_forward_instance(act, cfg, rng)
        rep = s1_witness_check(act, cfg, gx, hy, m=2)
        assert rep.passed
        assert rep.extra["member"]
        assert act.same(gx[0] + act.inv((rep.witness["a"],)) + (rep.witness["b"],), hy[0])


def test_s1_witness_rejects_far_group_elements(z2):
    act, cfg = z2
    x = (0.0, 0.0)
    rep = s1_witness_check(act, cfg, (("e",), x), (("e1", "e1", "e1"), x), m=2)
    assert not rep.passed
    assert rep.extra["member"] is False
