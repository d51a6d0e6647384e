"""Trails, the flow, the weighted flow metric and the contraction estimates."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .core import BicombingSpace, ConvexityModulus, LengthModulus, PropertyReport, sample_map, to_jsonable
from .errors import AccuracyError, ConfigurationError, DomainError, NoConvergenceError, PreconditionError

T_MAX_CAP = 100.0


@dataclass(frozen=True)
class Trail:
    """``Phi_shift c_{x,y}``: the bicombing path from x to y run at unit speed, shifted in time.

    It sits at ``x`` until time ``-shift`` and at ``y`` from ``length - shift`` on.
    """

    space: BicombingSpace = field(repr=False)
    x: Any
    y: Any
    shift: float = 0.0
    length: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "length", float(self.space.length(self.x, self.y)))

    @property
    def start(self) -> float:
        return -self.shift

    @property
    def end(self) -> float:
        return self.length - self.shift

    def __call__(self, t: float):
        s = t + self.shift
        if s <= 0 or self.length == 0:
            return self.x
        if s >= self.length:
            return self.y
        return self.space.bicombe(self.x, self.y, s / self.length)

    def to_dict(self) -> dict:
        return {"space": self.space.name, "x": to_jsonable(self.x), "y": to_jsonable(self.y), "shift": self.shift}


def trail(space: BicombingSpace, x, y, shift: float = 0.0) -> Trail:
    return Trail(space, x, y, shift)


def trail_eval(c: Trail, t: float):
    return c(t)


def flow_shift(c: Trail, tau: float) -> Trail:
    """``(Phi_tau c)(t) = c(t + tau)``."""
    return Trail(c.space, c.x, c.y, c.shift + tau)


def restrict(c: Trail, a: float, b: float) -> Trail:
    """``res_[a,b] c``: agrees with ``c`` on ``[a, b]`` and is constant outside.

    For a consistent bicombing this is again a canonical trail, namely
    ``Phi_{-max(a, c_-)} c_{c(a), c(b)}``.
    """
    if not a < b:
        raise DomainError(f"restriction needs a < b, got [{a}, {b}]")
    if c.length == 0:
        return c
    return Trail(c.space, c(a), c(b), -max(a, c.start))


def check_restriction_consistency(c: Trail, a: float, b: float, tol: float | None = None,
                                  samples: int = 64) -> PropertyReport:
    """Compare the canonical restriction with ``t -> c(clamp(t, a, b))`` at sampled times."""
    tol = c.space.tol if tol is None else tol
    r = restrict(c, a, b)
    lo, hi = min(a, c.start) - 1, max(b, c.end) + 1
    worst, wit = 0.0, None
    for t in np.linspace(lo, hi, samples):
        t = float(t)
        v = c.space.dist(r(t), c(min(max(t, a), b)))
        if v >= worst:
            worst, wit = v, {"t": t}
    wit = {**(wit or {}), "trail": c.to_dict(), "a": a, "b": b}
    return PropertyReport("restriction_consistency", c.space.name, 0, samples, tol, worst, wit, samples,
                          mode=c.space.mode)


# -- flow metric -------------------------------------------------------------


@dataclass(frozen=True)
class FlowDistance:
    value: float
    error_bound: float

    @property
    def upper(self) -> float:
        return self.value + self.error_bound

    @property
    def lower(self) -> float:
        return self.value - self.error_bound

    def to_dict(self) -> dict:
        return {"value": self.value, "error_bound": self.error_bound}


def fs_distance(c: Trail, d: Trail, tol: float = 1e-9) -> FlowDistance:
    """``int d(c(t), d(t)) / (2 e^|t|) dt`` with a certified error bound.

    The integral is split at 0 and at the four trail break points, each piece
    integrated adaptively.  Beyond the last break point both trails are
    constant, so the tails are exact; if the break points lie past
    ``ln(4/tol) + 5`` the window is cut there and the tail is bounded with the
    1-Lipschitz estimate ``|d(c(t),d(t)) - d(c(T),d(T))| <= 2(|t| - T)``.
    """
    if c.space is not d.space and c.space.name != d.space.name:
        raise DomainError("trails live in different spaces")
    if tol <= 0:
        raise DomainError("tolerance must be positive")
    dist = c.space.dist
    bps = [c.start, c.end, d.start, d.end]
    reach = max(abs(v) for v in bps)
    window = math.log(4 / tol) + 5
    if window > T_MAX_CAP:
        raise AccuracyError(f"tolerance {tol} needs an integration window beyond {T_MAX_CAP}")
    T = min(reach, window)
    exact_tails = reach <= window
    cuts = sorted({-T, T, 0.0, *(v for v in bps if -T < v < T)})

    def integrand(t):
        return dist(c(t), d(t)) * math.exp(-abs(t)) / 2

    value = err = 0.0
    piece_tol = tol / (4 * len(cuts))
    for lo, hi in zip(cuts, cuts[1:]):
        if hi - lo <= 0:
            continue
        # hitting the subdivision limit is fine: quad's estimate still enters err, checked below
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            v, e = quad(integrand, lo, hi, epsabs=piece_tol, epsrel=0, limit=200)
        value += v
        err += e
    for side in (-T, T):
        dT = dist(c(side), d(side))
        value += dT * math.exp(-T) / 2
        if not exact_tails:
            err += math.exp(-T)
    if err > tol:
        raise AccuracyError(f"flow distance error bound {err:.3g} exceeds tolerance {tol:.3g}")
    return FlowDistance(value, err)


def check_eval_bound(c: Trail, d: Trail, t0: float, tol: float = 1e-7, fs: FlowDistance | None = None) -> PropertyReport:
    """``d(c(t0), d(t0)) <= e^|t0| d_FS(c, d) + 2``."""
    fs = fs or fs_distance(c, d)
    lhs = c.space.dist(c(t0), d(t0))
    rhs = math.exp(abs(t0)) * fs.upper + 2
    return PropertyReport("eval_bound", c.space.name, 0, 1, tol, lhs - rhs, {"c": c.to_dict(), "d": d.to_dict(), "t0": t0},
                          1, mode=c.space.mode, extra={"lhs": lhs, "rhs": rhs})


def check_shift_bound(c: Trail, d: Trail, tau: float, sigma: float, tol: float = 1e-7,
                      fs: FlowDistance | None = None) -> PropertyReport:
    """``d_FS(Phi_tau c, Phi_sigma d) <= e^|tau| d_FS(c, d) + |sigma - tau|``, with both error bounds."""
    base = fs or fs_distance(c, d)
    shifted = fs_distance(flow_shift(c, tau), flow_shift(d, sigma))
    rhs = math.exp(abs(tau)) * base.upper + abs(sigma - tau)
    v = shifted.lower - rhs
    return PropertyReport("shift_bound", c.space.name, 0, 1, tol, v,
                          {"c": c.to_dict(), "d": d.to_dict(), "tau": tau, "sigma": sigma}, 1, mode=c.space.mode,
                          extra={"lhs": shifted.value, "rhs": rhs})


def random_trail(space: BicombingSpace, rng: np.random.Generator, max_length: float = 4.0, max_shift: float = 3.0,
                 constant_prob: float = 0.1) -> Trail:
    x = space.sample(rng)
    if rng.random() < constant_prob:
        return Trail(space, x, x, float(rng.uniform(-max_shift, max_shift)))
    if space.shoot is not None:
        y = space.shoot(rng, x, float(rng.uniform(0, max_length)))
    else:
        y = space.sample(rng)
    return Trail(space, x, y, float(rng.uniform(-max_shift, max_shift)))


def lemma_bounds_sweep(space: BicombingSpace, n: int, seed: int = 0, t0s=(-3, -2, -1, 0, 1, 2, 3),
                       shifts=(-3.0, 0.0, 3.0), tol: float = 1e-7, quad_tol: float = 1e-8,
                       workers: int = 1) -> PropertyReport:
    """Both trail-pair bounds over grids of evaluation times and shift pairs."""

    def task(rng, i):
        c, d = random_trail(space, rng), random_trail(space, rng)
        fs = fs_distance(c, d, quad_tol)
        worst, wit = -math.inf, None
        for t0 in t0s:
            r = check_eval_bound(c, d, t0, tol, fs)
            if r.max_violation > worst:
                worst, wit = r.max_violation, r.witness
        for tau in shifts:
            for sigma in shifts:
                r = check_shift_bound(c, d, tau, sigma, tol, fs)
                if r.max_violation > worst:
                    worst, wit = r.max_violation, r.witness
        return worst, wit

    res = sample_map(task, n, seed, workers)
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("lemma_bounds", space.name, seed, n, tol, worst[0], worst[1], n, mode=space.mode,
                          extra={"t0s": list(t0s), "shifts": list(shifts), "quad_tol": quad_tol})


# -- contraction constants ----------------------------------------------------


@dataclass(frozen=True)
class ContractionConstants:
    r_prime: float
    delta_prime: float
    r_double_prime: float
    r: float
    T: float
    beta: float
    L: float
    delta: float
    f_beta: float

    @property
    def ratio(self) -> float:
        return self.r_double_prime / (self.r_double_prime + 2 * self.r_prime + self.f_beta + self.L)

    def shadow_bound(self, A: ConvexityModulus) -> float:
        return A(self.ratio, self.beta, 0.0) + self.f_beta * (2 * self.r_prime + self.f_beta + self.L) / self.r_double_prime


def _tail_integral(rp: float) -> float:
    """``int_{-inf}^{-r'} (1 + |t|) e^{-|t|} dt``."""
    return (2 + rp) * math.exp(-rp)


def verify_constants(k: ContractionConstants, A: ConvexityModulus, f: LengthModulus) -> dict[str, bool]:
    """Re-substitute the constants into every defining condition."""
    fb = f(k.beta)
    return {
        "r_prime>1": k.r_prime > 1,
        "0<delta_prime<1": 0 < k.delta_prime < 1,
        "r_double_prime>f(beta)": k.r_double_prime > fb,
        "tail<=delta/3": _tail_integral(k.r_prime) <= k.delta / 3,
        "window<=delta/3": 2 * k.delta_prime * (1 - math.exp(-k.r_prime)) <= k.delta / 3,
        "ratio>=2/3": k.ratio >= 2 / 3,
        "shadow<=delta_prime": k.shadow_bound(A) <= k.delta_prime,
        "r_definition": k.r == 2 * k.r_prime + k.r_double_prime + fb,
        "T_definition": k.T == k.r - k.r_prime - fb,
    }


def contraction_constants(beta: float, L: float, delta: float, A: ConvexityModulus, f: LengthModulus,
                          cap: float = 1e12) -> ContractionConstants:
    """Deterministic choice of ``r', delta', r''`` and the derived ``r, T``.

    ``r'`` is the least value above 1 meeting the tail condition (bisection),
    ``delta'`` the largest meeting the window condition (capped below 1), and
    ``r''`` the least value found by doubling then bisection that meets the
    ratio and shadow conditions.
    """
    if beta < 0 or L <= 0 or delta <= 0:
        raise DomainError("need beta >= 0 and L, delta > 0")
    if A(1.0, beta, 0.0) > 1e-12:
        raise PreconditionError(f"A(1, beta, 0) = {A(1.0, beta, 0.0)} does not vanish")
    fb = f(beta)
    lo, hi = 1.0, 2.0
    while _tail_integral(hi) > delta / 3:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = (lo + hi) / 2
        if _tail_integral(mid) <= delta / 3:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12:
            break
    rp = hi
    dp = min(delta / (6 * (1 - math.exp(-rp))), 0.999)
    while 2 * dp * (1 - math.exp(-rp)) > delta / 3:
        dp = math.nextafter(dp, 0)
    rest = 2 * rp + fb + L

    def ok(rpp):
        ratio = rpp / (rpp + rest)
        return rpp > fb and ratio >= 2 / 3 and A(ratio, beta, 0.0) + fb * rest / rpp <= dp

    lo = max(fb, 2 * rest)
    hi = lo + 1.0
    while not ok(hi):
        lo, hi = hi, 2 * hi
        if hi > cap:
            raise NoConvergenceError("A does not decay fast enough near t = 1 to meet the shadow condition")
    for _ in range(200):
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-9 * hi:
            break
    rpp = hi
    r = 2 * rp + rpp + fb
    T = r - rp - fb
    return ContractionConstants(rp, dp, rpp, r, T, beta, L, delta, fb)


# -- shadowing and contraction checks ----------------------------------------------


def check_shadow_lemma(space: BicombingSpace, A: ConvexityModulus, f: LengthModulus, consts: ContractionConstants,
                       x1, x2, x, grid: int = 100, tol: float | None = None) -> PropertyReport:
    """Trails into a common point shadow each other around time ``T`` after the shift ``tau``."""
    tol = space.tol if tol is None else tol
    d = space.dist
    if d(x1, x2) > consts.beta:
        raise PreconditionError(f"d(x1, x2) = {d(x1, x2)} exceeds beta = {consts.beta}")
    l1, l2 = space.length(x1, x), space.length(x2, x)
    if l1 > consts.r + consts.L:
        raise PreconditionError(f"l(c_x1,x) = {l1} exceeds r + L = {consts.r + consts.L}")
    c1, c2 = Trail(space, x1, x), Trail(space, x2, x)
    tau = l2 - l1
    bound = consts.shadow_bound(A)
    ts = [float(t) for t in np.linspace(consts.T - consts.r_prime, consts.T + consts.r_prime, grid)]
    curve = [float(d(c1(t), c2(t + tau))) - bound for t in ts]
    k = int(np.argmax(curve))
    return PropertyReport("shadow_lemma", space.name, 0, grid, tol, curve[k],
                          {"x1": x1, "x2": x2, "x": x, "t": ts[k], "tau": tau}, grid, mode=space.mode,
                          extra={"bound": bound, "curve": {"t": ts, "residual": curve}})


def _admissible_triple(space: BicombingSpace, rng: np.random.Generator, beta: float, reach: float):
    """``x1``, ``x2`` within ``beta`` of it, and ``x`` with ``l(c_{x1,x}) <= reach``.

    Lengths concentrate near ``reach`` so the trails are still moving at time ``T``.
    """
    if space.shoot is None:
        raise ConfigurationError(f"space {space.name} cannot build long trails")
    x1 = space.sample(rng)
    x2 = x1 if rng.random() < 0.05 else space.shoot(rng, x1, float(rng.uniform(0, beta)))
    if space.dist(x1, x2) > beta:
        x2 = space.bicombe(x1, x2, beta / space.dist(x1, x2) * (1 - 1e-12))
    x = space.shoot(rng, x1, reach * float(rng.uniform(0.97, 1.0)))
    return x1, x2, x


def shadow_sweep(space: BicombingSpace, A: ConvexityModulus, f: LengthModulus, consts: ContractionConstants,
                 n: int, seed: int = 0, grid: int = 100, tol: float | None = None, workers: int = 1,
                 keep_curves: int = 5) -> PropertyReport:
    """Shadowing on ``n`` admissible triples; the residual curves of the first ``keep_curves`` are kept."""
    tol = space.tol if tol is None else tol

    def task(rng, i):
        x1, x2, x = _admissible_triple(space, rng, consts.beta, consts.r + consts.L)
        rep = check_shadow_lemma(space, A, f, consts, x1, x2, x, grid, tol)
        return rep.max_violation, rep.witness, rep.extra["curve"] if i < keep_curves else None

    res = sample_map(task, n, seed, workers)
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("shadow_lemma", space.name, seed, n, tol, worst[0], worst[1], n, mode=space.mode,
                          extra={"constants": consts, "bound": consts.shadow_bound(A),
                                 "violations": [r[0] for r in res], "curves": [r[2] for r in res[:keep_curves]]})


def contraction_pair(space: BicombingSpace, consts: ContractionConstants, x1, x2, x, tau: float) -> tuple[Trail, Trail]:
    """``Phi_T c_{x1, c_{x1,x}(r)}`` and ``Phi_{T+tau} c_{x2, c_{x2,x}(r)}``."""
    z1 = Trail(space, x1, x)(consts.r)
    z2 = Trail(space, x2, x)(consts.r)
    return Trail(space, x1, z1, consts.T), Trail(space, x2, z2, consts.T + tau)


def check_contraction(space: BicombingSpace, A: ConvexityModulus, f: LengthModulus, beta: float, L: float,
                      delta: float, n: int, seed: int = 0, quad_tol: float = 1e-9, tau_grid: int = 5,
                      consts: ContractionConstants | None = None, workers: int = 1) -> PropertyReport:
    """Flowing for time ``T`` brings the two trails within ``delta`` using the proof's ``tau``.

    The proof's witness is ``tau = l(c_{x2,x}) - l(c_{x1,x})``; a small grid over
    ``[-f(beta), f(beta)]`` is searched too and the best value recorded.
    """
    consts = consts or contraction_constants(beta, L, delta, A, f)
    fb = consts.f_beta

    def task(rng, i):
        x1, x2, x = _admissible_triple(space, rng, beta, consts.r + L)
        tau = space.length(x2, x) - space.length(x1, x)
        if abs(tau) > fb + 1e-9:
            return math.inf, {"reason": "witness outside [-f(beta), f(beta)]", "tau": tau}
        fd = fs_distance(*contraction_pair(space, consts, x1, x2, x, tau), tol=quad_tol)
        best = fd.value
        for s in np.linspace(-fb, fb, tau_grid) if tau_grid > 1 else ():
            best = min(best, fs_distance(*contraction_pair(space, consts, x1, x2, x, float(s)), tol=quad_tol).value)
        return fd.value - delta - fd.error_bound, {"x1": x1, "x2": x2, "x": x, "tau": tau, "d_fs": fd.value,
                                                   "error_bound": fd.error_bound, "best_grid_d_fs": best}

    res = sample_map(task, n, seed, workers)
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("contraction", space.name, seed, n, 0.0, worst[0], worst[1], n, mode=space.mode,
                          extra={"constants": consts, "max_d_fs": max(r[1].get("d_fs", math.inf) for r in res)})
