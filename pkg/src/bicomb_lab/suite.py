"""Named checks that a sweep configuration can request.

Every runner takes the options of one config section (already typed) and
returns a :class:`PropertyReport`.  The option names accepted by each check
are listed in ``CHECKS[name].options``; anything else is a usage error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import core, flow, sl2, tightspan, transfer
from .core import BicombingSpace, ConvexityModulus, LengthModulus, PropertyReport, sample_map
from .errors import ConfigurationError
from .spaces import REGISTRY, get_space


@dataclass(frozen=True)
class Resolved:
    space: BicombingSpace
    A: ConvexityModulus
    f: LengthModulus
    lhs: Callable | None = None


def resolve_space(name: str) -> Resolved:
    """A space together with the moduli the checks use for it."""
    if name.startswith("product:"):
        left, right = (resolve_space(s) for s in name[len("product:"):].split("*"))
        space, Abar = core.product_space(left.space, left.A, right.space, right.A)
        fbar = LengthModulus(lambda s: math.hypot(left.f(s), right.f(s)), f"l2({left.f.name},{right.f.name})")
        return Resolved(space, Abar, fbar)
    if name == "sl2r-model":
        return Resolved(get_space(name), sl2.sl2_convexity_modulus(), sl2.sl2_length_modulus(), sl2.a_convex_upper_lhs)
    if name.startswith("tree:"):
        size, seed = (int(v) for v in name[len("tree:"):].split(","))
        edges = tightspan.random_tree_edges(size, np.random.default_rng(seed), max_weight=3)
        _, space = tightspan.tree_tight_span(tightspan.graph_metric(edges, size))
        return Resolved(space, core.linear_modulus(), core.identity_length_modulus())
    return Resolved(get_space(name), core.linear_modulus(), core.identity_length_modulus())


def known_space(name: str) -> bool:
    if name.startswith("product:"):
        parts = name[len("product:"):].split("*")
        return len(parts) == 2 and all(known_space(p) for p in parts)
    if name.startswith("tree:"):
        try:
            size, seed = (int(v) for v in name[len("tree:"):].split(","))
        except ValueError:
            return False
        return size >= 1
    return name in REGISTRY


@dataclass(frozen=True)
class Check:
    run: Callable[..., PropertyReport]
    options: tuple[str, ...]
    needs_space: bool = True


def _workers(opts):
    return opts.get("workers", 1)


# -- bicombing axioms ------------------------------------------------------------


def _axioms(o):
    r = resolve_space(o["space"])
    return core.check_bicombing_axioms(r.space, o["n"], o.get("tol"), o["seed"], workers=_workers(o))


def _consistent(o):
    r = resolve_space(o["space"])
    return core.check_consistent(r.space, o["n"], o.get("tol"), o["seed"], workers=_workers(o))


def _equivariant(o):
    r = resolve_space(o["space"])
    return core.check_equivariant(r.space, o["n"], o.get("tol"), o["seed"], workers=_workers(o))


def _a_convex(o):
    r = resolve_space(o["space"])
    return core.check_a_convex(r.space, r.A, o["n"], o.get("tol"), o["seed"], workers=_workers(o), lhs=r.lhs)


def _length_modulus(o):
    r = resolve_space(o["space"])
    return core.check_length_modulus(r.space, r.f, o["n"], o.get("tol"), o["seed"], workers=_workers(o))


def _endpoint(o):
    r = resolve_space(o["space"])
    return core.endpoint_convergence_check(r.space, r.A, o["n"], o["seed"], o.get("tol"), workers=_workers(o))


# -- flow space -------------------------------------------------------------------


def _weight_normalization(o):
    """Constant trails at ``x`` and ``y`` sit at flow-space distance ``d(x, y)``."""
    space = resolve_space(o["space"]).space
    tol = o.get("tol", 1e-8)

    def task(rng, i):
        x, y = space.sample(rng), space.sample(rng)
        c = flow.Trail(space, x, x, float(rng.uniform(-3, 3)))
        e = flow.Trail(space, y, y, float(rng.uniform(-3, 3)))
        fd = flow.fs_distance(c, e, tol=o.get("quad_tol", 1e-10))
        return abs(fd.value - space.dist(x, y)), {"x": x, "y": y, "fs": fd.value}

    return core._sweep("weight_normalization", space, o["n"], tol, o["seed"], task, _workers(o))


def _lemma_bounds(o):
    space = resolve_space(o["space"]).space
    return flow.lemma_bounds_sweep(space, o["n"], o["seed"], tol=o.get("tol", 1e-7), workers=_workers(o))


def _constants(o):
    """The recipe over a list of ``delta`` values, re-verified in closed form."""
    r = resolve_space(o.get("space", "h2"))
    deltas = o.get("deltas", [o.get("delta", 0.1)])
    rows, failed = [], []
    for delta in deltas:
        k = flow.contraction_constants(o.get("beta", 1.0), o.get("L", 1.0), delta, r.A, r.f)
        ok = flow.verify_constants(k, r.A, r.f)
        rows.append({"delta": delta, "T": k.T, "r": k.r, "r_prime": k.r_prime, "delta_prime": k.delta_prime,
                     "r_double_prime": k.r_double_prime, "verified": ok})
        failed += [(delta, name) for name, v in ok.items() if not v]
    return PropertyReport("constants", r.space.name, 0, len(deltas), 0.0, float(len(failed)), failed or None,
                          len(deltas), extra={"sweep": rows, "beta": o.get("beta", 1.0), "L": o.get("L", 1.0)})


def _contraction(o):
    r = resolve_space(o["space"])
    return flow.check_contraction(r.space, r.A, r.f, o.get("beta", 1.0), o.get("L", 1.0), o.get("delta", 0.1),
                                  o["n"], o["seed"], quad_tol=o.get("quad_tol", 1e-9),
                                  tau_grid=o.get("tau_grid", 1), workers=_workers(o))


def _shadow(o):
    r = resolve_space(o["space"])
    consts = flow.contraction_constants(o.get("beta", 1.0), o.get("L", 1.0), o.get("delta", 0.1), r.A, r.f)
    return flow.shadow_sweep(r.space, r.A, r.f, consts, o["n"], o["seed"], grid=o.get("grid", 100),
                             tol=o.get("tol"), workers=_workers(o))


# -- hyperbolic formulas and the model space -----------------------------------------


def _g_profile(o):
    return sl2.g_profile_check(o.get("grid", 1000), o.get("r_max", 50.0), o.get("tol", 1e-9))


def _holonomy(o):
    return sl2.holonomy_sweep(o["n"], o["seed"], o.get("diameter", 5.0), o.get("samples", 10_000),
                              o.get("tol", 1e-6), _workers(o))


def _area_bound(o):
    return sl2.area_bound_sweep(o["n"], o["seed"], o.get("diameter", 5.0), o.get("tol", 1e-12), _workers(o))


def _sl2_chain(o):
    return sl2.chain_sweep(o["n"], o["seed"], o.get("scale", 3.0), o.get("tol", 1e-6), _workers(o))


def _sl2_length_difference(o):
    return sl2.length_difference_sweep(o["n"], o["seed"], o.get("scale", 3.0), o.get("tol", 1e-6), _workers(o))


# -- transfer ----------------------------------------------------------------------


def _action(o):
    name = o.get("action", "z2")
    if name == "z2":
        return transfer.z2_action(), ("e", "e1", "E1", "e2", "E2")
    if name == "h2":
        return transfer.h2_action(), ("e", "a", "A", "b", "B")
    raise ConfigurationError(f"unknown action {name!r}; known: ['h2', 'z2']")


def _transfer_setup(o):
    act, S = _action(o)
    A, f = core.linear_modulus(), core.identity_length_modulus()
    cfg = transfer.transfer_constants(act, A, f, S, o.get("k", 2), o.get("delta", 0.1))
    return act, A, f, cfg


def _transfer(o):
    act, A, f, cfg = _transfer_setup(o)
    return transfer.check_transfer_condition(act, A, f, cfg, o["n"], o["seed"], quad_tol=o.get("quad_tol", 1e-9),
                                             workers=_workers(o))


def _homotopy_axioms(o):
    act, _, _, cfg = _transfer_setup(o)
    return transfer.check_homotopy_axioms(act, cfg, o["n"], o["seed"], o.get("tol", 1e-8), workers=_workers(o))


def _semigroup(o):
    act, _, _, cfg = _transfer_setup(o)
    return transfer.check_semigroup(act, cfg, o["n"], o["seed"], o.get("tol", 1e-8), workers=_workers(o))


# -- finite metrics ------------------------------------------------------------------


def _random_graph(rng, size):
    """A connected random graph: a random tree plus a few chords."""
    edges = [(u, v) for u, v, _ in tightspan.random_tree_edges(size, rng)]
    for _ in range(int(rng.integers(0, size))):
        u, v = (int(x) for x in rng.integers(size, size=2))
        if u != v:
            edges.append((u, v))
    return tightspan.graph_metric(edges, size)


def _covering_radius(o):
    """Random connected graphs; each is checked against its own four-point constant."""
    samples = o.get("samples", 20)

    def task(rng, i):
        d = _random_graph(rng, int(rng.integers(2, o.get("max_size", 10) + 1)))
        delta = tightspan.four_point_delta(d)
        rep = tightspan.covering_radius_check(d, delta, samples, int(rng.integers(2**31)), o.get("tol", 1e-9))
        return rep.max_violation, {"metric": d.d, "delta": delta, "witness": rep.witness}

    res = sample_map(task, o["n"], o["seed"], _workers(o))
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("covering_radius", "random-graphs", o["seed"], o["n"], o.get("tol", 1e-9), worst[0],
                          worst[1], o["n"], extra={"violations": [r[0] for r in res]})


def _tree_delta(o):
    """``four_point_delta`` is exactly zero on random weighted trees."""

    def task(rng, i):
        size = int(rng.integers(4, o.get("max_size", 10) + 1))
        d = tightspan.graph_metric(tightspan.random_tree_edges(size, rng, max_weight=5), size)
        delta = tightspan.four_point_delta(d)
        return float(delta), {"metric": d.d}

    res = sample_map(task, o["n"], o["seed"], _workers(o))
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("tree_delta", "random-trees", o["seed"], o["n"], 0.0, worst[0], worst[1], o["n"])


def _projection(o):
    """``project_extremal`` on random admissible functions of random metrics reaches extremality."""
    tol = o.get("tol", 1e-9)

    def task(rng, i):
        size = o.get("size", 6)
        pts = rng.random((size, 2)) * 10
        d = tightspan.FiniteMetric.from_matrix(np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2))
        g = tightspan.random_admissible(d, rng)
        f = tightspan.project_extremal(g, d, tol=1e-12, max_iter=o.get("max_iter", 100))
        return tightspan.extremal_residual(f, d), {"g": g, "f": f}

    res = sample_map(task, o["n"], o["seed"], _workers(o))
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("projection", "random-l1-metrics", o["seed"], o["n"], tol, worst[0], worst[1], o["n"])


CHECKS: dict[str, Check] = {
    "axioms": Check(_axioms, ("space", "n", "tol", "seed")),
    "consistent": Check(_consistent, ("space", "n", "tol", "seed")),
    "equivariant": Check(_equivariant, ("space", "n", "tol", "seed")),
    "a_convex": Check(_a_convex, ("space", "n", "tol", "seed")),
    "length_modulus": Check(_length_modulus, ("space", "n", "tol", "seed")),
    "endpoint": Check(_endpoint, ("space", "n", "tol", "seed")),
    "weight_normalization": Check(_weight_normalization, ("space", "n", "tol", "seed", "quad_tol")),
    "lemma_bounds": Check(_lemma_bounds, ("space", "n", "tol", "seed")),
    "constants": Check(_constants, ("space", "beta", "L", "delta", "deltas"), needs_space=False),
    "contraction": Check(_contraction, ("space", "n", "seed", "beta", "L", "delta", "quad_tol", "tau_grid")),
    "shadow": Check(_shadow, ("space", "n", "tol", "seed", "beta", "L", "delta", "grid")),
    "g_profile": Check(_g_profile, ("grid", "r_max", "tol"), needs_space=False),
    "holonomy": Check(_holonomy, ("n", "seed", "diameter", "samples", "tol"), needs_space=False),
    "area_bound": Check(_area_bound, ("n", "seed", "diameter", "tol"), needs_space=False),
    "sl2_chain": Check(_sl2_chain, ("n", "seed", "scale", "tol"), needs_space=False),
    "sl2_length_difference": Check(_sl2_length_difference, ("n", "seed", "scale", "tol"), needs_space=False),
    "transfer": Check(_transfer, ("action", "n", "seed", "k", "delta", "quad_tol"), needs_space=False),
    "homotopy_axioms": Check(_homotopy_axioms, ("action", "n", "seed", "k", "delta", "tol"), needs_space=False),
    "semigroup": Check(_semigroup, ("action", "n", "seed", "k", "delta", "tol"), needs_space=False),
    "covering_radius": Check(_covering_radius, ("n", "seed", "samples", "max_size", "tol"), needs_space=False),
    "tree_delta": Check(_tree_delta, ("n", "seed", "max_size"), needs_space=False),
    "projection": Check(_projection, ("n", "seed", "size", "max_iter", "tol"), needs_space=False),
}

INT_OPTIONS = {"n", "seed", "k", "grid", "samples", "max_size", "size", "max_iter", "tau_grid", "workers"}
FLOAT_OPTIONS = {"tol", "beta", "L", "delta", "quad_tol", "r_max", "diameter", "scale"}
LIST_OPTIONS = {"deltas"}


def run_check(name: str, opts: dict) -> PropertyReport:
    opts = {"n": 100, "seed": 0, **opts}
    return CHECKS[name].run(opts)
