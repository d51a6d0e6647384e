"""The universal cover of the unit tangent bundle of the hyperbolic plane.

A point is a base point in the half-plane plus a fiber angle measured against
the coordinate frame and lifted to the real line.  The metric is
``ds^2 = ds_H^2 + (dtheta + dx/y)^2``; parallel transport keeps
``dtheta + dx/y = 0``.

Over a base geodesic the fiber lines form a flat strip.  The bicombing path
from A to B is the straight line in that strip: its base moves along the
geodesic at constant speed while the fiber, relative to the parallel
transport of A's fiber, grows linearly by ``h_B``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .core import BicombingSpace, ConvexityModulus, LengthModulus, PropertyReport, sample_map
from .errors import DomainError
from .h2 import (
    H2Point,
    Mobius,
    h2_direction,
    h2_distance,
    h2_exp,
    h2_geodesic,
    h2_transport,
    holonomy_check,
    max_area_g,
    oriented_area,
    random_h2_point,
    shoot_upward,
    triangle_area,
)


@dataclass(frozen=True)
class SLPoint:
    base: H2Point
    fiber: float

    def __post_init__(self):
        if not math.isfinite(float(self.fiber)):
            raise DomainError("fiber coordinate must be finite")

    def as_list(self) -> list[float]:
        return self.base.as_list() + [float(self.fiber)]


def strip_coordinates(a: SLPoint, b: SLPoint) -> tuple[float, float]:
    """``(d_base, h_B)``: base distance and B's fiber relative to A's transported fiber."""
    d = h2_distance(a.base, b.base)
    return d, b.fiber - a.fiber + h2_transport(a.base, b.base)


def from_strip(a: SLPoint, direction: float, d_base: float, h: float) -> SLPoint:
    """Inverse of :func:`strip_coordinates` given the base direction at A."""
    pb = h2_exp(a.base, d_base, direction)
    return SLPoint(pb, a.fiber - h2_transport(a.base, pb) + h)


@lru_cache(maxsize=1024)
def _fiber_offset(a: SLPoint, b: SLPoint):
    # trails evaluate the same endpoint pair at many times
    return b.fiber - a.fiber + h2_transport(a.base, b.base)


def sl2_bicombe(a: SLPoint, b: SLPoint, t: float) -> SLPoint:
    if t == 0:
        return a
    if t == 1:
        return b
    h = _fiber_offset(a, b)
    pc = h2_geodesic(a.base, b.base, t)
    return SLPoint(pc, a.fiber - h2_transport(a.base, pc) + t * h)


def sl2_path_length(a: SLPoint, b: SLPoint) -> float:
    d, h = strip_coordinates(a, b)
    return math.hypot(d, h)


def lift_isometry(m: Mobius):
    """Act on the model by ``m`` on the base and the frame rotation of ``m`` on the fiber."""

    def act(p: SLPoint) -> SLPoint:
        return SLPoint(m(p.base), p.fiber + m.frame_rotation(p.base))

    return act


def fiber_shift(c: float):
    return lambda p: SLPoint(p.base, p.fiber + c)


# -- moduli -----------------------------------------------------------------


def _g(r: float) -> float:
    return max_area_g(r)


def sl2_modulus_a(t: float, r: float) -> float:
    """``a(t, r) = ((t r)^2 + (4 t r + t g(r) + g(t r))^2)^(1/2)``."""
    if not (0 <= t <= 1) or r < 0:
        raise DomainError(f"a(t, r) needs t in [0,1] and r >= 0, got {(t, r)}")
    return math.hypot(t * r, 4 * t * r + t * _g(r) + _g(t * r))


def sl2_modulus_A(t: float, x: float, x2: float) -> float:
    """``a(1-t, x) + a(t, x')``: the start pair's contribution fades as ``t -> 1``."""
    return sl2_modulus_a(1 - t, x) + sl2_modulus_a(t, x2)


def sl2_modulus_fprime(s: float) -> float:
    if s < 0:
        raise DomainError(f"f' needs s >= 0, got {s}")
    return math.hypot(s, 3 * s + _g(s))


def sl2_modulus_f(s: float) -> float:
    """``f = 2 f'`` with ``f'(x) = (x^2 + (3x + g(x))^2)^(1/2)``."""
    return 2 * sl2_modulus_fprime(s)


def sl2_convexity_modulus() -> ConvexityModulus:
    return ConvexityModulus(sl2_modulus_A, (True, True, False), "sl2-A")


def sl2_length_modulus() -> LengthModulus:
    return LengthModulus(sl2_modulus_f, "sl2-f")


# -- the area bound g and holonomy ------------------------------------------------


def g_profile_check(grid: int = 1000, r_max: float = 50.0, tol: float = 1e-9) -> PropertyReport:
    """``g(0) = 0``, ``g`` strictly increasing on a grid, and ``g(r_max)`` within ``tol`` of ``pi``."""
    rs = np.linspace(0.0, r_max, grid)
    gs = [_g(float(r)) for r in rs]
    non_increasing = int(np.sum(np.diff(gs) <= 0))
    violations = {"g0": abs(gs[0]), "increasing": float(non_increasing), "sup": max(0.0, math.pi - tol - _g(r_max))}
    worst = max(violations, key=violations.get)
    return PropertyReport("g_profile", "h2", 0, grid, 0.0, violations[worst], {"which": worst}, grid,
                          extra={"violations": violations, "g_r_max": _g(r_max)})


def _small_triangle(rng: np.random.Generator, diameter: float):
    return tuple(random_h2_point(rng, radius=diameter / 2) for _ in range(3))


def holonomy_sweep(n: int = 200, seed: int = 0, diameter: float = 5.0, samples: int = 10_000, tol: float = 1e-6,
                   workers: int = 1) -> PropertyReport:
    """Transport drift around sampled geodesic triangles equals the enclosed area."""

    def task(rng, i):
        p, q, r = _small_triangle(rng, diameter)
        drift, area, res = holonomy_check(p, q, r, samples)
        return res, {"p": p, "q": q, "r": r, "drift": drift, "area": area}

    res = sample_map(task, n, seed, workers)
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("holonomy_area", "h2", seed, n, tol, worst[0], worst[1], n)


def area_bound_sweep(n: int = 10_000, seed: int = 0, diameter: float = 5.0, tol: float = 1e-12,
                     workers: int = 1) -> PropertyReport:
    """A triangle's area is at most ``g`` of each of its sides."""

    def task(rng, i):
        p, q, r = _small_triangle(rng, diameter)
        area = float(triangle_area(p, q, r))
        bound = min(_g(float(h2_distance(a, b))) for a, b in ((p, q), (q, r), (r, p)))
        return area - bound, {"p": p, "q": q, "r": r, "area": area, "bound": bound}

    res = sample_map(task, n, seed, workers)
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("area_bound", "h2", seed, n, tol, worst[0], worst[1], n)


# -- distance bounds ------------------------------------------------------------


def _polygon_length(a: SLPoint, b: SLPoint, verts: list[H2Point]) -> float:
    """Length of the best lift of the base polygon ``verts`` joining A to B."""
    total_d = 0.0
    total_u = b.fiber - a.fiber
    for p, q in zip(verts, verts[1:]):
        total_d += h2_distance(p, q)
        total_u += h2_transport(p, q)
    return math.hypot(total_d, total_u)


def sl2_distance_bounds(a: SLPoint, b: SLPoint, mesh: int = 16) -> tuple[float, float]:
    """``(lower, upper)`` for the true distance.

    The lower bound is the base distance (the projection is 1-Lipschitz).  The
    upper bound is the length of an actual path: a geodesic polygon in the
    base, optimized vertex by vertex, lifted with the fiber change spread in
    proportion to segment length.  Polygons start with 8 segments and are
    refined by midpoint insertion up to ``mesh``; each level keeps the best
    length found so far, so the bound never increases with ``mesh``.
    """
    if mesh < 8:
        raise DomainError("mesh must be at least 8")
    lower = h2_distance(a.base, b.base)
    upper = sl2_path_length(a, b)
    if upper == 0:
        return 0.0, 0.0
    m = 8
    verts = [h2_geodesic(a.base, b.base, k / m) for k in range(m + 1)]
    while True:
        x0 = np.array([[p.x, p.log_y] for p in verts[1:-1]], dtype=float).ravel()

        def objective(z):
            inner = [H2Point(float(z[2 * i]), float(z[2 * i + 1])) for i in range(len(z) // 2)]
            return _polygon_length(a, b, [a.base] + inner + [b.base])

        res = minimize(objective, x0, method="L-BFGS-B", options={"maxiter": 200})
        best = res.x if res.fun < objective(x0) else x0
        upper = min(upper, float(objective(best)))
        verts = [a.base] + [H2Point(float(best[2 * i]), float(best[2 * i + 1])) for i in range(len(best) // 2)]
        verts.append(b.base)
        if 2 * m > mesh:
            break
        refined = [verts[0]]
        for p, q in zip(verts, verts[1:]):
            refined += [h2_geodesic(p, q, 0.5), q]
        verts, m = refined, 2 * m
    return lower, max(upper, lower)


# -- space ------------------------------------------------------------------


def sl2_sampler(rng: np.random.Generator, scale: float) -> SLPoint:
    base = random_h2_point(rng, radius=scale / 2)
    return SLPoint(base, float(rng.uniform(-scale / 2, scale / 2)))


def sl2_shoot(rng: np.random.Generator, a: SLPoint, length: float) -> SLPoint:
    """A point B with ``l(gamma_{A,B}) = length``; its base lies above A's."""
    phi = float(rng.uniform(-1.2, 1.2))
    pb = shoot_upward(rng, a.base, length * math.cos(phi))
    b = SLPoint(pb, a.fiber - h2_transport(a.base, pb) + length * math.sin(phi))
    return b


def sl2_space(scale: float = 3.0) -> BicombingSpace:
    """The model with its strip bicombing.

    ``dist`` is the path length of the bicombing, a certified upper estimate of
    the distance, so the space runs in one-sided mode.
    """
    isos = {
        "lift(translate(0.7,-2,3))": lift_isometry(Mobius.translation(0.7, -2.0, 3.0)),
        "lift(translate(1.3,vertical))": lift_isometry(Mobius.translation(1.3)),
        "lift(parabolic(+1))": lift_isometry(Mobius(1.0, 1.0, 0.0, 1.0)),
        "fiber(+0.9)": fiber_shift(0.9),
    }
    return BicombingSpace("sl2r-model", sl2_path_length, sl2_bicombe, sl2_sampler, sl2_path_length, isos,
                          tol=1e-6, one_sided=True, scale=scale, shoot=sl2_shoot)


def a_convex_upper_lhs(x: SLPoint, y: SLPoint, x2: SLPoint, y2: SLPoint, t: float) -> float:
    """Upper estimate of ``d(gamma_{x,y}(t), gamma_{x',y'}(t))``, routed through ``gamma_{x,y'}(t)``."""
    c, c2, mid = sl2_bicombe(x, y, t), sl2_bicombe(x2, y2, t), sl2_bicombe(x, y2, t)
    return min(sl2_path_length(c, c2), sl2_path_length(c, mid) + sl2_path_length(mid, c2))


# -- inequality chains ---------------------------------------------------------


def chain_check_convexity(a: SLPoint, b: SLPoint, b2: SLPoint, t: float, tol: float = 1e-6,
                          mesh: int | None = None) -> PropertyReport:
    """Check the three links bounding ``d(C, C')`` for ``C = gamma_{A,B}(t)``, ``C' = gamma_{A,B'}(t)``.

    (i) base contraction ``d(p C, p C') <= t d(p B, p B')``;
    (ii) ``l(C, C') <= (d(pC, pC')^2 + (t (h_B' - h_B) + area(A, C, C'))^2)^(1/2)`` with
    the area signed by orientation; (iii) ``l(C, C') <= a(t, d_hat(B, B'))``.
    ``d_hat`` is the path length, or the optimized upper bound when ``mesh`` is given.
    """
    if not 0 <= t <= 1:
        raise DomainError("t must lie in [0, 1]")
    c, c2 = sl2_bicombe(a, b, t), sl2_bicombe(a, b2, t)
    dc = h2_distance(c.base, c2.base)
    link1 = dc - t * h2_distance(b.base, b2.base)
    _, hb = strip_coordinates(a, b)
    _, hb2 = strip_coordinates(a, b2)
    lcc = sl2_path_length(c, c2)
    area = oriented_area(a.base, c.base, c2.base)
    link2 = lcc - math.hypot(dc, t * (hb2 - hb) + area)
    d_hat = sl2_path_length(b, b2) if mesh is None else sl2_distance_bounds(b, b2, mesh)[1]
    link3 = lcc - sl2_modulus_a(t, d_hat)
    links = {"base": link1, "strip": link2, "modulus": link3}
    return PropertyReport("sl2_chain", "sl2r-model", 0, 1, tol, max(links.values()), {"A": a, "B": b, "B2": b2, "t": t},
                          3, mode="one-sided", extra={"links": links, "d_hat": d_hat})


def length_difference_check(a: SLPoint, b: SLPoint, b2: SLPoint, tol: float = 1e-6,
                            mesh: int | None = None) -> PropertyReport:
    """``|l(gamma_{A,B}) - l(gamma_{A,B'})| <= f'(d_hat(B, B'))`` in one-sided mode."""
    d_hat = sl2_path_length(b, b2) if mesh is None else sl2_distance_bounds(b, b2, mesh)[1]
    lhs = abs(sl2_path_length(a, b) - sl2_path_length(a, b2))
    v = lhs - sl2_modulus_fprime(d_hat)
    return PropertyReport("sl2_length_difference", "sl2r-model", 0, 1, tol, v, {"A": a, "B": b, "B2": b2}, 1,
                          mode="one-sided", extra={"lhs": lhs, "d_hat": d_hat})


def _aggregate(name: str, reports: list[PropertyReport], seed: int, tol: float) -> PropertyReport:
    worst = max(reports, key=lambda r: r.max_violation)
    extra = {}
    if reports and "links" in reports[0].extra:
        extra = {k: max(r.extra["links"][k] for r in reports) for k in reports[0].extra["links"]}
    return PropertyReport(name, "sl2r-model", seed, len(reports), tol, worst.max_violation, worst.witness,
                          len(reports), mode="one-sided", extra={"worst_links": extra})


def chain_sweep(n: int, seed: int = 0, scale: float = 3.0, tol: float = 1e-6, workers: int = 1) -> PropertyReport:
    def task(rng, i):
        a, b, b2 = (sl2_sampler(rng, scale) for _ in range(3))
        t = 1.0 if i == 0 else float(rng.random())
        return chain_check_convexity(a, b, b2, t, tol)

    return _aggregate("sl2_chain", sample_map(task, n, seed, workers), seed, tol)


def length_difference_sweep(n: int, seed: int = 0, scale: float = 3.0, tol: float = 1e-6,
                            workers: int = 1) -> PropertyReport:
    def task(rng, i):
        a, b, b2 = (sl2_sampler(rng, scale) for _ in range(3))
        return length_difference_check(a, b, b2, tol)

    return _aggregate("sl2_length_difference", sample_map(task, n, seed, workers), seed, tol)


def base_direction(a: SLPoint, b: SLPoint) -> float:
    return h2_direction(a.base, b.base)
