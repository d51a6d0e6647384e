"""Acceptance criteria, one test per criterion, each with its runtime budget.

Run with ``pytest -m acceptance``; a pass/fail line per criterion is printed
in the terminal summary.
"""
from __future__ import annotations

import itertools
import math
import time
from pathlib import Path
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from bicomb_lab.cli import main
from bicomb_lab.core import identity_length_modulus, linear_modulus
from bicomb_lab.flow import contraction_constants, verify_constants
from bicomb_lab.spaces import get_space
from bicomb_lab.suite import _action, run_check
from bicomb_lab.tightspan import (
    FiniteMetric,
    four_point_delta,
    graph_metric,
    is_extremal,
    kuratowski,
    linf_distance,
    random_tree_edges,
    tripod_center,
)
from bicomb_lab.transfer import transfer_constants

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance
CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@contextmanager
def criterion(num: int, title: str, budget: float):
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        elapsed = time.perf_counter() - t0
        ok = ok and elapsed < budget
        ACCEPTANCE_LINES.append(f"C{num:<2} {'PASS' if ok else 'FAIL'}  {title}  ({elapsed:.1f}s / {budget:.0f}s)")
    assert elapsed < budget, f"criterion {num} took {elapsed:.1f}s, budget {budget}s"


def passes(name: str, **opts):
    rep = run_check(name, opts)
    assert rep.passed, f"{name} {opts}: max violation {rep.max_violation}, witness {rep.witness}"
    return rep


def test_c1_weight_normalization():
    with criterion(1, "constant trails in H2 sit at distance d", 5):
        rep = passes("weight_normalization", space="h2", n=100, tol=1e-8)
        assert rep.n == 100


def test_c2_lemma_bounds():
    with criterion(2, "evaluation and shift bounds on 1000 trail pairs per space", 120):
        for space in ("euclidean2", "h2", "sl2r-model"):
            passes("lemma_bounds", space=space, n=1000, tol=1e-7)


AXIOM_SPACES = [
    ("euclidean2", 1e-12),
    ("h2", 1e-9),
    ("sl2r-model", 1e-6),
    ("tree:12,1", 1e-12),
    ("tree:9,4", 1e-12),
    ("product:euclidean2*h2", 1e-9),
]


def test_c3_axiom_suites():
    with criterion(3, "bicombing axiom suites at 1e4 samples, negative controls fail", 300):
        for space, tol in AXIOM_SPACES:
            checks = ["axioms", "consistent", "a_convex", "length_modulus"]
            # random trees have no nontrivial isometries
            if not space.startswith("tree:"):
                checks.append("equivariant")
            for check in checks:
                passes(check, space=space, n=10_000, tol=tol)
        assert get_space("sl2r-model").mode == "one-sided"
        for check, space in [("axioms", "broken-frozen"), ("equivariant", "broken-isometry"),
                             ("axioms", "broken-speed"), ("a_convex", "broken-speed")]:
            assert not run_check(check, {"space": space, "n": 200}).passed, (check, space)


def test_c4_hyperbolic_formulas():
    with criterion(4, "g profile, holonomy versus area, area bound", 60):
        passes("g_profile", grid=1000, r_max=50.0, tol=1e-9)
        passes("holonomy", n=200, diameter=5.0, tol=1e-6)
        rep = passes("area_bound", n=10_000, diameter=5.0)
        assert rep.n == 10_000


def test_c5_convexity_chain():
    with criterion(5, "convexity chain and length difference on 500 instances", 120):
        passes("sl2_chain", n=500, scale=3.0, tol=1e-6)
        passes("sl2_length_difference", n=500, scale=3.0, tol=1e-6)


@pytest.mark.parametrize("beta,L,delta", [(1, 1, 0.1), (1, 1, 0.01), (2, 1, 0.1)])
def test_c6_contraction(beta, L, delta):
    with criterion(6, f"contraction recipe at beta={beta} L={L} delta={delta}", 180):
        A, f = linear_modulus(), identity_length_modulus()
        k = contraction_constants(beta, L, delta, A, f)
        assert all(verify_constants(k, A, f).values())
        rep = passes("contraction", space="h2", n=500, beta=beta, L=L, delta=delta)
        assert rep.extra["max_d_fs"] <= delta


def test_c7_shadowing():
    with criterion(7, "shadowing on 200 instances in H2 and the model space", 120):
        for space in ("h2", "sl2r-model"):
            passes("shadow", space=space, n=200, grid=100)


def test_c8_transfer():
    with criterion(8, "transfer condition and homotopy action for Z2 and H2", 300):
        for action, k in (("z2", 2), ("h2", 1)):
            act, S = _action({"action": action})
            cfg = transfer_constants(act, linear_modulus(), identity_length_modulus(), S, k, 0.1)
            assert math.isfinite(cfg.R) and math.isfinite(cfg.T)
            rep = passes("transfer", action=action, k=k, delta=0.1, n=200)
            assert rep.extra["tau_sources"] == ["witness"]
            passes("homotopy_axioms", action=action, k=k, delta=0.1, n=1000, tol=1e-8)
            passes("semigroup", action=action, k=k, delta=0.1, n=1000, tol=1e-8)


def test_c9_tight_span():
    with criterion(9, "tight span of finite metrics", 60):
        # two points: extremal exactly when f1 + f2 = d
        d2 = FiniteMetric.from_matrix([[0, 3], [3, 0]])
        for a, b in itertools.product([Fraction(i, 2) for i in range(9)], repeat=2):
            if a + b >= 3:
                assert is_extremal(np.array([float(a), float(b)]), d2, tol=0.0)[0] == (a + b == 3)
        rng = np.random.default_rng(0)
        for _ in range(50):
            p, q, r = (int(v) for v in rng.integers(1, 20, size=3))
            x, y, z = sorted((p, q, r))
            d3 = FiniteMetric.from_matrix([[0, x, y], [x, 0, z], [y, z, 0]]) if x + y >= z else None
            if d3 is None:
                continue
            center = tripod_center(d3)
            f = np.array([float(c) for c in center])
            for i in range(3):
                j, l = (m for m in range(3) if m != i)
                gromov = Fraction(d3.d[i][j] + d3.d[i][l] - d3.d[j][l], 2)
                assert center[i] == gromov
                assert abs(linf_distance(f, kuratowski(i, d3)) - float(gromov)) <= 1e-12
        passes("projection", n=100, size=6, max_iter=100, tol=1e-9)
        for _ in range(50):
            n = int(rng.integers(4, 12))
            assert four_point_delta(graph_metric(random_tree_edges(n, rng, max_weight=5), n)) == 0
        assert four_point_delta(graph_metric([(0, 1), (1, 2), (2, 3), (3, 0)], 4)) == 1
        for _ in range(10):
            n = 7
            edges = random_tree_edges(n, rng, max_weight=3) + [(0, n - 1, 2), (1, 4, 1)]
            d = graph_metric(edges, n)
            for x, y in itertools.combinations(range(n), 2):
                assert linf_distance(kuratowski(x, d), kuratowski(y, d)) == d.d[x][y]
        passes("covering_radius", n=20, max_size=10)


def test_c10_determinism(tmp_path):
    with criterion(10, "byte-identical summaries across worker counts", 600):
        outs = []
        for workers in (1, 2):
            out = tmp_path / f"w{workers}"
            assert main(["verify", str(CONFIGS / "default.ini"), "--out", str(out), "--workers", str(workers)]) == 0
            outs.append(out)
        assert (outs[0] / "summary.csv").read_bytes() == (outs[1] / "summary.csv").read_bytes()
        for rep in sorted((outs[0] / "reports").iterdir()):
            assert (outs[1] / "reports" / rep.name).read_bytes() == rep.read_bytes()
