"""Hyperbolic plane in the upper half-plane model.

Points are stored as ``(x, log_y)``.  Every formula below is written in
log-height form so that points at hyperbolic distance in the thousands from
``i`` (which the contraction constants routinely demand) stay representable
in double precision.  The same functions accept :mod:`mpmath` numbers; when
any coordinate is an ``mpf`` the whole computation runs in mpmath at the
ambient ``mp.prec``.  Use that for configurations where isometries act on
points far out near the boundary.

The global frame of the unit tangent bundle is the coordinate frame
(``d/dx`` has angle 0).  Parallel transport along a curve changes the angle of
a vector against that frame by ``-dx/y``; ``drift`` below always means the
line integral of the connection form ``dx/y``, so a counter-clockwise loop
has positive drift equal to its enclosed area.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import mpmath
import numpy as np

from .errors import DomainError

LOG2 = math.log(2.0)


class _FloatOps:
    pi = math.pi
    inf = math.inf
    sqrt = staticmethod(math.sqrt)
    exp = staticmethod(math.exp)
    log1p = staticmethod(math.log1p)
    expm1 = staticmethod(math.expm1)
    sin = staticmethod(math.sin)
    cos = staticmethod(math.cos)
    tanh = staticmethod(math.tanh)
    sinh = staticmethod(math.sinh)
    asinh = staticmethod(math.asinh)
    asin = staticmethod(math.asin)
    atan2 = staticmethod(math.atan2)
    log2 = LOG2

    @staticmethod
    def log(v):
        return math.log(v) if v > 0 else -math.inf

    @staticmethod
    def num(v):
        return float(v)


class _MpOps:
    inf = mpmath.inf
    sqrt = staticmethod(mpmath.sqrt)
    exp = staticmethod(mpmath.exp)
    log1p = staticmethod(mpmath.log1p)
    expm1 = staticmethod(mpmath.expm1)
    sin = staticmethod(mpmath.sin)
    cos = staticmethod(mpmath.cos)
    tanh = staticmethod(mpmath.tanh)
    sinh = staticmethod(mpmath.sinh)
    asinh = staticmethod(mpmath.asinh)
    asin = staticmethod(mpmath.asin)
    atan2 = staticmethod(mpmath.atan2)

    @property
    def pi(self):
        return +mpmath.pi

    @property
    def log2(self):
        return mpmath.log(2)

    @staticmethod
    def log(v):
        return mpmath.log(v) if v > 0 else -mpmath.inf

    @staticmethod
    def num(v):
        return mpmath.mpf(v)


_FLOAT = _FloatOps()
_MP = _MpOps()


def ops_for(*values):
    """Pick the arithmetic backend for a mix of numbers and points."""
    for v in values:
        cls = v.__class__
        if cls is float or (cls is H2Point and v.x.__class__ is float and v.log_y.__class__ is float):
            continue
        if isinstance(v, H2Point):
            if isinstance(v.x, mpmath.mpf) or isinstance(v.log_y, mpmath.mpf):
                return _MP
        elif isinstance(v, mpmath.mpf):
            return _MP
    return _FLOAT


def _logaddexp(o, a, b):
    if a == -o.inf:
        return b
    if b == -o.inf:
        return a
    m = max(a, b)
    return m + o.log1p(o.exp(-abs(a - b)))


def _log_sinh(o, h):
    """log(sinh(h)) for h >= 0, finite for arguments far past overflow."""
    if h <= 0:
        return -o.inf
    if h < 20:
        return o.log(o.sinh(h))
    return h - o.log2 + o.log1p(-o.exp(-2 * h))


def _sign(v):
    return int(v > 0) - int(v < 0)


@dataclass(frozen=True)
class H2Point:
    """A point of the upper half-plane, stored as horizontal coordinate and log-height."""

    x: float
    log_y: float

    def __post_init__(self):
        if not (math.isfinite(float(self.x)) and math.isfinite(float(self.log_y))):
            raise DomainError(f"non-finite H2 point ({self.x!r}, log_y={self.log_y!r})")

    @classmethod
    def from_xy(cls, x, y) -> "H2Point":
        if not (y > 0):
            raise DomainError(f"H2 point needs y > 0, got {y!r}")
        o = ops_for(x, y)
        return cls(x, o.log(y))

    @property
    def y(self):
        return ops_for(self).exp(self.log_y)

    def to_float(self) -> "H2Point":
        return H2Point(float(self.x), float(self.log_y))

    def as_list(self) -> list[float]:
        """``[x, log_y]``; serializing ``y`` itself would overflow for far points."""
        return [float(self.x), float(self.log_y)]


def h2_point(x, y) -> H2Point:
    return H2Point.from_xy(x, y)


def h2_distance(p: H2Point, q: H2Point):
    """Hyperbolic distance, computed as ``2 asinh(S)`` with
    ``S^2 = sinh^2(dlog_y/2) + (dx/2)^2 / (y_p y_q)``."""
    o = ops_for(p, q)
    dl = abs(q.log_y - p.log_y)
    dx = abs(q.x - p.x)
    la = _log_sinh(o, dl / 2)
    lb = o.log(dx) - o.log2 - (p.log_y + q.log_y) / 2
    log_s = _logaddexp(o, 2 * la, 2 * lb) / 2
    if log_s == -o.inf:
        return o.num(0)
    if log_s < 20:
        return 2 * o.asinh(o.exp(log_s))
    return 2 * (log_s + o.log(1 + o.sqrt(1 + o.exp(-2 * log_s))))


def _direction_vec(p: H2Point, q: H2Point):
    """``(cos psi, sin psi)`` of the direction from ``p`` to ``q``, each with full relative precision.

    Returns ``None`` for coincident points.
    """
    o = ops_for(p, q)
    dx = q.x - p.x
    dl = q.log_y - p.log_y
    ldx = o.log(abs(dx))
    terms = (2 * ldx, p.log_y + q.log_y + o.log2 + _log_sinh(o, abs(dl)), o.log2 + ldx + p.log_y)
    m = max(terms)
    if m == -o.inf:
        return None
    num = o.exp(terms[0] - m) + _sign(dl) * o.exp(terms[1] - m)
    den = _sign(dx) * o.exp(terms[2] - m)
    norm = o.sqrt(num * num + den * den)
    return den / norm, num / norm


def h2_direction(p: H2Point, q: H2Point):
    """Angle (against the coordinate frame) of the unit tangent at ``p`` pointing to ``q``."""
    vec = _direction_vec(p, q)
    if vec is None:
        return ops_for(p, q).num(0)
    return ops_for(p, q).atan2(vec[1], vec[0])


def _exp_vec(p: H2Point, s, cos_psi, sin_psi) -> H2Point:
    # Cayley transform of the disk point rho * e^{i alpha}, alpha = psi - pi/2, rho = tanh(s/2)
    o = ops_for(p, s, cos_psi)
    rho = o.tanh(s / 2)
    log_1m_rho = o.log2 - (s + o.log1p(o.exp(-s)))
    log_1m_rho2 = 2 * o.log2 - s - 2 * o.log1p(o.exp(-s))
    # sin^2(alpha/2) = (1 - sin psi)/2, rewritten to avoid cancellation when sin psi ~ 1
    half = cos_psi * cos_psi / (2 * (1 + sin_psi)) if sin_psi > 0 else (1 - sin_psi) / 2
    log_den = _logaddexp(o, 2 * log_1m_rho, o.log(4 * rho) + o.log(half))
    x = p.x
    if cos_psi != 0:
        x = x + _sign(cos_psi) * o.exp(p.log_y + o.log(2 * rho * abs(cos_psi)) - log_den)
    return H2Point(x, p.log_y + log_1m_rho2 - log_den)


def h2_exp(p: H2Point, s, psi) -> H2Point:
    """The point at distance ``s`` from ``p`` along the geodesic leaving at angle ``psi``."""
    if s == 0:
        return p
    o = ops_for(p, s, psi)
    return _exp_vec(p, s, o.cos(psi), o.sin(psi))


def h2_geodesic(p: H2Point, q: H2Point, t) -> H2Point:
    """Constant-speed geodesic from ``p`` (t=0) to ``q`` (t=1).

    Each half is shot from its nearer endpoint, so points near either end are
    accurate even when the two ends are very far apart.
    """
    if t == 0 or p == q:
        return p
    if t == 1:
        return q
    d, forward, backward = _geodesic_frame(p, q) if ops_for(p, q) is _FLOAT else _frame(p, q)
    if d == 0:
        return p
    if t <= 0.5:
        return _exp_vec(p, t * d, *forward)
    return _exp_vec(q, (1 - t) * d, *backward)


def _frame(p: H2Point, q: H2Point):
    d = h2_distance(p, q)
    if d == 0:
        return d, None, None
    return d, _direction_vec(p, q), _direction_vec(q, p)


# float only: mpmath results depend on the working precision at call time
_geodesic_frame = lru_cache(maxsize=1024)(_frame)


def h2_transport(p: H2Point, q: H2Point):
    """Closed-form integral of ``dx/y`` along the geodesic segment from ``p`` to ``q``.

    A geodesic turns by exactly as much as parallel transport rotates, so the
    integral is the difference between the outgoing tangent angle at ``p`` and
    the incoming tangent angle at ``q``; it always lies in ``(-pi, pi)``.
    """
    if p == q:
        return ops_for(p).num(0)
    o = ops_for(p, q)
    diff = h2_direction(p, q) - (h2_direction(q, p) + o.pi)
    while diff <= -o.pi:
        diff += 2 * o.pi
    while diff > o.pi:
        diff -= 2 * o.pi
    return diff


def triangle_angles(p: H2Point, q: H2Point, r: H2Point):
    """Interior angles at ``p``, ``q``, ``r`` from the side lengths (half-angle law of cosines)."""
    o = ops_for(p, q, r)
    a, b, c = h2_distance(q, r), h2_distance(p, r), h2_distance(p, q)

    def angle(opp, s1, s2):
        if s1 == 0 or s2 == 0:
            return o.num(0)
        u = (opp - s1 + s2) / 2
        v = (opp + s1 - s2) / 2
        if u <= 0 or v <= 0:
            return o.num(0)
        val = o.exp(_log_sinh(o, u) + _log_sinh(o, v) - _log_sinh(o, s1) - _log_sinh(o, s2))
        val = min(max(val, 0), 1)
        return 2 * o.asin(o.sqrt(val))

    return angle(a, b, c), angle(b, a, c), angle(c, a, b)


def triangle_area(p: H2Point, q: H2Point, r: H2Point):
    """Area of the geodesic triangle, as the angle defect ``pi - (A + B + C)``."""
    o = ops_for(p, q, r)
    if p == q or q == r or p == r:
        return o.num(0)
    area = o.pi - sum(triangle_angles(p, q, r))
    return max(area, o.num(0))


def oriented_area(p: H2Point, q: H2Point, r: H2Point):
    """Signed area: positive when ``p -> q -> r`` runs counter-clockwise."""
    loop = h2_transport(p, q) + h2_transport(q, r) + h2_transport(r, p)
    area = triangle_area(p, q, r)
    return area if loop >= 0 else -area


def max_area_g(r):
    """Largest area of a triangle having one side of length ``r``: ``pi - 2 acos(tanh(r/2))``."""
    o = ops_for(r)
    if not (r >= 0):
        raise DomainError(f"max_area_g needs r >= 0, got {r!r}")
    # acos(tanh(u)) = 2 atan(e^-u) keeps g strictly increasing until it rounds to pi
    return o.pi - 4 * mpmath.atan(mpmath.exp(-r / 2)) if o is _MP else math.pi - 4 * math.atan(math.exp(-r / 2))


# -- isometries -------------------------------------------------------------


@dataclass(frozen=True)
class Mobius:
    """Orientation preserving isometry ``z -> (az+b)/(cz+d)`` with ``ad - bc = 1``.

    The sign is normalised so that ``c > 0``, or ``c == 0`` and ``d > 0``;
    then ``arg(cz+d)`` is continuous on the half-plane.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(float(det) - 1) > 1e-9:
            raise DomainError(f"Mobius matrix must have determinant 1, got {det}")
        if self.c < 0 or (self.c == 0 and self.d < 0):
            object.__setattr__(self, "a", -self.a)
            object.__setattr__(self, "b", -self.b)
            object.__setattr__(self, "c", -self.c)
            object.__setattr__(self, "d", -self.d)

    @classmethod
    def from_matrix(cls, a, b, c, d) -> "Mobius":
        o = ops_for(a, b, c, d)
        det = a * d - b * c
        if not det > 0:
            raise DomainError("matrix does not preserve the upper half-plane")
        s = o.sqrt(det)
        return cls(a / s, b / s, c / s, d / s)

    @classmethod
    def translation(cls, length, left=None, right=None) -> "Mobius":
        """Hyperbolic translation by ``length`` along the geodesic with ideal ends ``left < right``.

        Without ends the axis is the imaginary axis.
        """
        o = ops_for(length, left, right)
        e = o.exp(length / 2)
        diag = cls(e, o.num(0), o.num(0), 1 / e)
        if left is None:
            return diag
        conj = cls.from_matrix(o.num(1), -left, o.num(-1), right)
        return conj.inverse().compose(diag).compose(conj)

    def inverse(self) -> "Mobius":
        return Mobius(self.d, -self.b, -self.c, self.a)

    def compose(self, other: "Mobius") -> "Mobius":
        """``self o other``."""
        return Mobius(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __call__(self, p: H2Point) -> H2Point:
        o = ops_for(p, self.a)
        x, ly = p.x, p.log_y
        u = self.c * x + self.d
        log_den = _logaddexp(o, 2 * o.log(abs(u)), 2 * o.log(abs(self.c)) + 2 * ly)
        first = self.a * x + self.b
        nx = 0
        if first != 0 and u != 0:
            nx = _sign(first) * _sign(u) * o.exp(o.log(abs(first)) + o.log(abs(u)) - log_den)
        if self.a != 0 and self.c != 0:
            nx = nx + _sign(self.a * self.c) * o.exp(o.log(abs(self.a * self.c)) + 2 * ly - log_den)
        return H2Point(nx, ly - log_den)

    def frame_rotation(self, p: H2Point):
        """Angle by which the derivative at ``p`` rotates tangent vectors, ``-2 arg(cz+d)``."""
        o = ops_for(p, self.a)
        u = self.c * p.x + self.d
        if p.log_y > 0:
            return -2 * o.atan2(self.c, u * o.exp(-p.log_y))
        return -2 * o.atan2(self.c * o.exp(p.log_y), u)

    def as_list(self) -> list[float]:
        return [float(self.a), float(self.b), float(self.c), float(self.d)]


# -- discretised paths and holonomy ------------------------------------------


@dataclass(frozen=True)
class H2Path:
    """Sampled curve: float arrays of x, log-height and strictly increasing times."""

    xs: np.ndarray
    log_ys: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        if len(self.xs) < 2 or not (len(self.xs) == len(self.log_ys) == len(self.times)):
            raise DomainError("an H2Path needs at least two samples with matching arrays")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("H2Path times must be strictly increasing")

    @classmethod
    def from_points(cls, points: Sequence[H2Point], times=None) -> "H2Path":
        xs = np.array([float(p.x) for p in points])
        ls = np.array([float(p.log_y) for p in points])
        ts = np.arange(len(points), dtype=float) if times is None else np.asarray(times, dtype=float)
        return cls(xs, ls, ts)

    def reversed(self) -> "H2Path":
        return H2Path(self.xs[::-1].copy(), self.log_ys[::-1].copy(), -self.times[::-1])

    def concat(self, other: "H2Path") -> "H2Path":
        shift = self.times[-1] - other.times[0]
        return H2Path(
            np.concatenate([self.xs, other.xs[1:]]),
            np.concatenate([self.log_ys, other.log_ys[1:]]),
            np.concatenate([self.times, other.times[1:] + shift]),
        )


def parallel_transport_drift(path: H2Path) -> float:
    """Line integral of ``dx/y`` along the polyline through the samples.

    Each chord is integrated exactly:
    ``int dx/y = dx * dlog_y / (y0 * expm1(dlog_y))`` on a straight segment.
    """
    dx = np.diff(path.xs)
    dl = np.diff(path.log_ys)
    y0 = np.exp(path.log_ys[:-1])
    small = np.abs(dl) < 1e-8
    safe = np.where(small, 1.0, dl)
    ratio = np.where(small, 1.0 - dl / 2 + dl * dl / 6, safe / np.expm1(safe))
    return float(np.sum(dx * ratio / y0))


def _exp_many(p: H2Point, s: np.ndarray, vec: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`h2_exp` for a float base point and direction ``(cos psi, sin psi)``."""
    cos_psi, sin_psi = float(vec[0]), float(vec[1])
    half = cos_psi * cos_psi / (2 * (1 + sin_psi)) if sin_psi > 0 else (1 - sin_psi) / 2
    with np.errstate(divide="ignore"):
        rho = np.tanh(s / 2)
        log_1m_rho = LOG2 - np.logaddexp(0.0, s)
        log_1m_rho2 = 2 * LOG2 - s - 2 * np.log1p(np.exp(-s))
        second = np.log(4 * rho) + (math.log(half) if half > 0 else -np.inf)
        log_den = np.logaddexp(2 * log_1m_rho, second)
        xs = np.full_like(s, float(p.x))
        if cos_psi != 0:
            xs = xs + math.copysign(1.0, cos_psi) * np.exp(float(p.log_y) + np.log(2 * rho * abs(cos_psi)) - log_den)
    return xs, float(p.log_y) + log_1m_rho2 - log_den


def geodesic_path(p: H2Point, q: H2Point, n: int) -> H2Path:
    """``n`` samples of the geodesic from ``p`` to ``q``, uniform in arclength."""
    if n < 2:
        raise DomainError("need at least two samples")
    p, q = p.to_float(), q.to_float()
    ts = np.linspace(0.0, 1.0, n)
    d = float(h2_distance(p, q))
    if d == 0:
        return H2Path(np.full(n, p.x), np.full(n, p.log_y), ts)
    first = ts <= 0.5
    x1, l1 = _exp_many(p, ts[first] * d, _direction_vec(p, q))
    x2, l2 = _exp_many(q, (1 - ts[~first]) * d, _direction_vec(q, p))
    xs = np.concatenate([x1, x2])
    ls = np.concatenate([l1, l2])
    xs[0], ls[0], xs[-1], ls[-1] = p.x, p.log_y, q.x, q.log_y
    return H2Path(xs, ls, ts)


def holonomy_check(p: H2Point, q: H2Point, r: H2Point, n: int) -> tuple[float, float, float]:
    """Transport around the sampled loop ``p -> q -> r -> p``.

    ``n`` is the number of samples per side.  Returns
    ``(loop_drift, area, residual)`` with ``residual = | |loop_drift| - area |``.
    """
    if n < 10:
        raise DomainError("holonomy_check needs n >= 10")
    loop = geodesic_path(p, q, n).concat(geodesic_path(q, r, n)).concat(geodesic_path(r, p, n))
    drift = parallel_transport_drift(loop)
    area = float(triangle_area(p, q, r))
    return drift, area, abs(abs(drift) - area)


def random_h2_point(rng: np.random.Generator, center: H2Point | None = None, radius: float = 2.0) -> H2Point:
    """Random point within hyperbolic distance ``radius`` of ``center`` (default ``i``)."""
    center = center or H2Point(0.0, 0.0)
    s = radius * math.sqrt(rng.random())
    return h2_exp(center, s, rng.uniform(-math.pi, math.pi))


def shoot_upward(rng: np.random.Generator, p: H2Point, length: float) -> H2Point:
    """A random point at distance ``length`` from ``p`` lying above it.

    Geodesics heading to the point at infinity keep full relative precision in
    log-height coordinates however long they are, unlike geodesics running
    into a finite boundary point.
    """
    p = p.to_float()
    if length <= 0:
        return p
    w = float(rng.uniform(-1, 1)) * math.exp(p.log_y) * min(1.0, math.sinh(min(length, 8.0) / 4))
    lo, hi = 0.0, length + 5.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if h2_distance(p, H2Point(p.x + w, p.log_y + mid)) < length:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return H2Point(p.x + w, p.log_y + hi)


def _startup_sign_check() -> None:
    # positive drift <=> counter-clockwise loop with positive area
    a, b, c = H2Point(-1.0, 0.0), H2Point(1.0, 0.0), H2Point(0.0, math.log(2.5))
    drift, area, _ = holonomy_check(a, b, c, 200)
    if not (drift > 0 and area > 0 and abs(drift - area) < 1e-3):
        raise RuntimeError("connection form sign convention broken")


_startup_sign_check()
