"""Bicombed spaces, moduli and sampled property checkers."""
from __future__ import annotations

import dataclasses
import json
import math
import multiprocessing
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, PreconditionError

Point = Any


@dataclass(frozen=True)
class BicombingSpace:
    """A metric space together with a bicombing.

    ``sampler(rng, scale)`` draws a random point; ``scale`` roughly bounds its
    distance from a base point.  When ``one_sided`` is set, ``dist`` returns a
    certified upper estimate of the true distance rather than the distance.
    ``shoot(rng, x, length)``, when present, returns a point ``y`` with
    ``l(gamma_{x,y}) = length``; the flow-space checks use it to build long
    trails.
    """

    name: str
    dist: Callable[[Point, Point], float]
    bicombe: Callable[[Point, Point, float], Point]
    sampler: Callable[[np.random.Generator, float], Point]
    path_length: Callable[[Point, Point], float] | None = None
    isometries: dict[str, Callable[[Point], Point]] = field(default_factory=dict)
    tol: float = 1e-9
    one_sided: bool = False
    scale: float = 2.0
    shoot: Callable[[np.random.Generator, Point, float], Point] | None = None

    def length(self, x: Point, y: Point) -> float:
        """``l(gamma_{x,y})``; equal to ``dist`` for geodesic bicombings."""
        if self.path_length is None:
            return self.dist(x, y)
        return self.path_length(x, y)

    def sample(self, rng: np.random.Generator, scale: float | None = None) -> Point:
        try:
            return self.sampler(rng, self.scale if scale is None else scale)
        except Exception as exc:  # noqa: BLE001 - surface sampler bugs as config problems
            raise ConfigurationError(f"sampler of {self.name} failed: {exc}") from exc

    @property
    def mode(self) -> str:
        return "one-sided" if self.one_sided else "exact"


@dataclass(frozen=True)
class ConvexityModulus:
    """A function ``A(t, s, s')``.

    ``monotone_flags`` is ``(increasing in s, increasing in s', t-shape)``
    where the t-shape flag means increasing on [0,1/3] and decreasing on [2/3,1].
    """

    fn: Callable[[float, float, float], float]
    monotone_flags: tuple[bool, bool, bool] = (False, False, False)
    name: str = "A"

    def eval(self, t: float, s: float, s2: float) -> float:
        if not (0 <= t <= 1) or s < 0 or s2 < 0:
            raise DomainError(f"modulus arguments out of range: {(t, s, s2)}")
        return self.fn(t, s, s2)

    __call__ = eval


@dataclass(frozen=True)
class LengthModulus:
    """A function ``f(s)`` bounding how path lengths vary with the endpoints."""

    fn: Callable[[float], float]
    name: str = "f"

    def eval(self, s: float) -> float:
        if s < 0:
            raise DomainError(f"length modulus needs s >= 0, got {s}")
        return self.fn(s)

    __call__ = eval


def to_jsonable(obj: Any) -> Any:
    """Best effort conversion of points and witnesses to plain JSON values."""
    if hasattr(obj, "as_list"):
        return obj.as_list()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: to_jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if obj is None or isinstance(obj, str):
        return obj
    try:
        return float(obj)
    except (TypeError, ValueError):
        return repr(obj)


@dataclass
class PropertyReport:
    check: str
    space: str
    seed: int
    n: int
    tol: float
    max_violation: float
    witness: Any
    checks_run: int
    skipped: int = 0
    mode: str = "exact"
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "space": self.space,
            "seed": self.seed,
            "n": self.n,
            "tol": self.tol,
            "max_violation": self.max_violation,
            "witness": to_jsonable(self.witness),
            "passed": self.passed,
            "checks_run": self.checks_run,
            "skipped": self.skipped,
            "mode": self.mode,
            "extra": to_jsonable(self.extra),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# -- sweeping -----------------------------------------------------------------

_TASK: Callable | None = None


def _run_task(args):
    seed, i = args
    return _TASK(np.random.default_rng([seed, i]), i)


def sample_map(task: Callable[[np.random.Generator, int], Any], n: int, seed: int, workers: int = 1) -> list:
    """Evaluate ``task(rng_i, i)`` for ``i < n``; ``rng_i`` depends only on ``(seed, i)``.

    Results are identical for any worker count.  Workers fork, so ``task``
    may be a closure.
    """
    global _TASK
    if workers <= 1 or n < 2:
        return [task(np.random.default_rng([seed, i]), i) for i in range(n)]
    _TASK = task
    try:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(workers) as pool:
            return pool.map(_run_task, [(seed, i) for i in range(n)], chunksize=max(1, n // (4 * workers)))
    finally:
        _TASK = None


def _sweep(check: str, space: BicombingSpace, n: int, tol: float, seed: int, task, workers: int = 1,
           mode: str | None = None) -> PropertyReport:
    """``task`` returns ``None`` for a skipped sample or ``(violation, witness)``."""
    if n < 1:
        raise DomainError("need at least one sample")
    results = sample_map(task, n, seed, workers)
    worst, witness, run, skipped = -math.inf, None, 0, 0
    violations = []
    for res in results:
        if res is None:
            skipped += 1
            continue
        run += 1
        v, w = res
        violations.append(float(v))
        if v > worst or witness is None:
            worst, witness = v, w
    if run == 0:
        worst = 0.0
    return PropertyReport(check, space.name, seed, n, tol, float(worst), witness, run, skipped,
                          mode or space.mode, extra={"violations": violations})


def _tol(space: BicombingSpace, tol: float | None) -> float:
    return space.tol if tol is None else tol


# -- checkers -----------------------------------------------------------------


def check_bicombing_axioms(space: BicombingSpace, n: int, tol: float | None = None, seed: int = 0,
                           polyline: int = 32, workers: int = 1) -> PropertyReport:
    """Endpoints, constant speed, polyline length and ``gamma_{x,x} = x``."""
    d, g = space.dist, space.bicombe

    def task(rng, i):
        x, y = space.sample(rng), space.sample(rng)
        t, t2 = sorted(float(v) for v in rng.random(2))
        l = space.length(x, y)
        v_end = max(d(g(x, y, 0.0), x), d(g(x, y, 1.0), y))
        v_chord = d(g(x, y, t), g(x, y, t2)) - (t2 - t) * l
        pts = [g(x, y, k / polyline) for k in range(polyline + 1)]
        poly = sum(d(a, b) for a, b in zip(pts, pts[1:]))
        v_poly = abs(poly - l)
        v_const = d(g(x, x, t), x)
        v = max(v_end, v_chord, v_poly, v_const)
        return v, {"x": x, "y": y, "t": t, "t2": t2, "endpoint": v_end, "chord": v_chord,
                   "polyline": v_poly, "constant": v_const}

    return _sweep("bicombing_axioms", space, n, _tol(space, tol), seed, task, workers)


def check_a_convex(space: BicombingSpace, A: ConvexityModulus, n: int, tol: float | None = None, seed: int = 0,
                   workers: int = 1, lhs: Callable | None = None) -> PropertyReport:
    """``d(gamma_{x,y}(t), gamma_{x',y'}(t)) <= A(t, d(x,x'), d(y,y'))``.

    ``lhs`` may supply an upper estimate of the left side for one-sided spaces.
    """
    d, g = space.dist, space.bicombe

    def task(rng, i):
        x, x2, y, y2 = (space.sample(rng) for _ in range(4))
        t = float(rng.random())
        left = lhs(x, y, x2, y2, t) if lhs else d(g(x, y, t), g(x2, y2, t))
        right = A(t, d(x, x2), d(y, y2))
        return left - right, {"x": x, "x2": x2, "y": y, "y2": y2, "t": t, "lhs": left, "rhs": right}

    return _sweep("a_convex", space, n, _tol(space, tol), seed, task, workers)


def check_consistent(space: BicombingSpace, n: int, tol: float | None = None, seed: int = 0,
                     workers: int = 1) -> PropertyReport:
    """``gamma_{x,y}(t) = gamma_{gamma(s), gamma(s')}((t-s)/(s'-s))`` for ``s <= t <= s'``."""
    d, g = space.dist, space.bicombe

    def task(rng, i):
        x, y = space.sample(rng), space.sample(rng)
        s, s2 = sorted(float(v) for v in rng.random(2))
        if s2 - s < 1e-9:
            return None
        u = float(rng.random())
        t = s + u * (s2 - s)
        v = d(g(x, y, t), g(g(x, y, s), g(x, y, s2), u))
        return v, {"x": x, "y": y, "s": s, "s2": s2, "t": t}

    return _sweep("consistent", space, n, _tol(space, tol), seed, task, workers)


def check_equivariant(space: BicombingSpace, n: int, tol: float | None = None, seed: int = 0,
                      workers: int = 1) -> PropertyReport:
    """Every listed isometry preserves ``dist`` and commutes with the bicombing."""
    if not space.isometries:
        raise ConfigurationError(f"space {space.name} has no isometries to check")
    d, g = space.dist, space.bicombe
    names = sorted(space.isometries)

    def task(rng, i):
        x, y = space.sample(rng), space.sample(rng)
        t = float(rng.random())
        worst, wit = -math.inf, None
        for name in names:
            h = space.isometries[name]
            gx, gy = h(x), h(y)
            v = max(d(h(g(x, y, t)), g(gx, gy, t)), abs(d(gx, gy) - d(x, y)))
            if v > worst:
                worst, wit = v, {"isometry": name, "x": x, "y": y, "t": t}
        return worst, wit

    return _sweep("equivariant", space, n, _tol(space, tol), seed, task, workers)


def check_length_modulus(space: BicombingSpace, f: LengthModulus, n: int, tol: float | None = None, seed: int = 0,
                         workers: int = 1) -> PropertyReport:
    """``|l(x,y) - l(x',y')| <= f(d(x,x') + d(y,y'))``."""
    d = space.dist

    def task(rng, i):
        x, x2, y, y2 = (space.sample(rng) for _ in range(4))
        # half the samples perturb a single pair so small arguments of f are exercised
        if i % 2:
            x2 = space.bicombe(x, x2, float(rng.random()) * 0.2)
            y2 = space.bicombe(y, y2, float(rng.random()) * 0.2)
        left = abs(space.length(x, y) - space.length(x2, y2))
        right = f(d(x, x2) + d(y, y2))
        return left - right, {"x": x, "x2": x2, "y": y, "y2": y2, "lhs": left, "rhs": right}

    return _sweep("length_modulus", space, n, _tol(space, tol), seed, task, workers)


def endpoint_convergence_check(space: BicombingSpace, A: ConvexityModulus, n: int, seed: int = 0,
                               tol: float | None = None, ts: Sequence[float] = (0.9, 0.99, 0.999, 1.0),
                               workers: int = 1) -> PropertyReport:
    """Bicombing paths with a common endpoint close up: ``d(gamma_{x,y}(t), gamma_{x',y}(t)) <= A(t, d(x,x'), 0)``.

    Also records the bound at ``t = 1``, which must vanish.
    """
    d, g = space.dist, space.bicombe

    def task(rng, i):
        x, x2, y = (space.sample(rng) for _ in range(3))
        dx = d(x, x2)
        worst, wit = -math.inf, None
        for t in ts:
            left = d(g(x, y, t), g(x2, y, t))
            right = A(t, dx, 0.0)
            if left - right > worst:
                worst, wit = left - right, {"x": x, "x2": x2, "y": y, "t": t, "lhs": left, "rhs": right}
        worst = max(worst, abs(A(1.0, dx, 0.0)))
        return worst, wit

    return _sweep("endpoint_convergence", space, n, _tol(space, tol), seed, task, workers)


# -- moduli -------------------------------------------------------------------


def linear_modulus() -> ConvexityModulus:
    """``A(t, s, s') = (1-t) s + t s'``, the modulus of a convex bicombing."""
    return ConvexityModulus(lambda t, s, s2: (1 - t) * s + t * s2, (True, True, False), "linear")


def scaled_modulus(A: ConvexityModulus, c: float) -> ConvexityModulus:
    return ConvexityModulus(lambda t, s, s2: c * A.fn(t, s, s2), A.monotone_flags, f"{c}*{A.name}")


def identity_length_modulus() -> LengthModulus:
    return LengthModulus(lambda s: s, "identity")


def monotonize_modulus(A: ConvexityModulus, resolution: int = 48, s_max: float = 10.0) -> ConvexityModulus:
    """Monotone majorant of ``A`` built from running maxima on a lattice.

    The lattice has ``resolution`` steps in ``t`` (rounded up to a multiple of
    three, so 1/3 and 2/3 are nodes) and in ``s, s'`` over ``[0, s_max]``.
    Off-lattice ``s`` values round up to the next node, as does ``t`` on
    ``[0, 1/3]``; on ``[2/3, 1]`` ``t`` rounds down.  In the middle third the
    value is the larger of the running maximum at ``t`` and the linear
    interpolation between the values at 1/3 and 2/3.
    """
    if resolution < 16:
        raise DomainError("monotonize_modulus needs resolution >= 16")
    nt = 3 * math.ceil(resolution / 3)
    ns = resolution
    ts = np.arange(nt + 1) / nt
    ss = np.linspace(0.0, s_max, ns + 1)
    raw = np.array([[[A.fn(t, a, b) for b in ss] for a in ss] for t in ts], dtype=float)
    B = np.maximum.accumulate(np.maximum.accumulate(raw, axis=1), axis=2)
    third, two_thirds = nt // 3, 2 * nt // 3
    Ap = B.copy()
    Ap[: third + 1] = np.maximum.accumulate(B[: third + 1], axis=0)
    Ap[two_thirds:] = np.maximum.accumulate(B[two_thirds:][::-1], axis=0)[::-1]
    lo, hi = Ap[third].copy(), Ap[two_thirds].copy()
    for k in range(third + 1, two_thirds):
        t = ts[k]
        Ap[k] = np.maximum(B[k], (3 * t - 1) * hi + (2 - 3 * t) * lo)

    def s_index(s):
        if s > s_max * (1 + 1e-12):
            raise DomainError(f"monotonized modulus only defined up to s = {s_max}, got {s}")
        return min(ns, int(math.ceil(s / s_max * ns - 1e-9)))

    def fn(t, s, s2):
        i, j = s_index(s), s_index(s2)
        pos = t * nt
        if t <= 1 / 3 or t >= 2 / 3:
            k = math.ceil(pos - 1e-9) if t <= 1 / 3 else math.floor(pos + 1e-9)
            return float(Ap[k, i, j])
        kr = round(pos)
        if abs(pos - kr) < 1e-9:
            return float(Ap[kr, i, j])
        b = max(A.fn(t, a, c) for a in ss[: i + 1] for c in ss[: j + 1])
        return float(max(b, (3 * t - 1) * hi[i, j] + (2 - 3 * t) * lo[i, j]))

    return ConvexityModulus(fn, (True, True, True), f"mono({A.name})")


def product_space(s1: BicombingSpace, A1: ConvexityModulus, s2: BicombingSpace,
                  A2: ConvexityModulus) -> tuple[BicombingSpace, ConvexityModulus]:
    """The product with the l2 metric and the componentwise bicombing.

    The moduli must be increasing in ``s`` and ``s'`` (the estimate replaces
    each factor distance by the larger product distance).
    """
    for A in (A1, A2):
        if not (A.monotone_flags[0] and A.monotone_flags[1]):
            raise PreconditionError(f"modulus {A.name} is not declared monotone in s and s'; monotonize first")

    def dist(p, q):
        return math.hypot(s1.dist(p[0], q[0]), s2.dist(p[1], q[1]))

    def bicombe(p, q, t):
        return (s1.bicombe(p[0], q[0], t), s2.bicombe(p[1], q[1], t))

    def length(p, q):
        return math.hypot(s1.length(p[0], q[0]), s2.length(p[1], q[1]))

    def sampler(rng, scale):
        return (s1.sampler(rng, scale), s2.sampler(rng, scale))

    isos = {}
    for k, h in s1.isometries.items():
        isos[f"{k}x1"] = lambda p, h=h: (h(p[0]), p[1])
    for k, h in s2.isometries.items():
        isos[f"1x{k}"] = lambda p, h=h: (p[0], h(p[1]))
    space = BicombingSpace(f"{s1.name}x{s2.name}", dist, bicombe, sampler, length, isos,
                           max(s1.tol, s2.tol), s1.one_sided or s2.one_sided, min(s1.scale, s2.scale))
    Abar = ConvexityModulus(lambda t, s, s2_: math.hypot(A1.fn(t, s, s2_), A2.fn(t, s, s2_)),
                            (True, True, A1.monotone_flags[2] and A2.monotone_flags[2]),
                            f"l2({A1.name},{A2.name})")
    return space, Abar
