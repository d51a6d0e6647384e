"""The retraction onto ``P_R(x0)``, the homotopy action built from it, and condition (*).

Group elements are words of generator labels, applied right to left: the
word ``("a", "b")`` sends ``x`` to ``a(b(x))``.  ``"e"`` is always the
identity.
"""
from __future__ import annotations

import contextlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import mpmath
import numpy as np

from .core import BicombingSpace, ConvexityModulus, LengthModulus, PropertyReport, sample_map
from .errors import DomainError, PreconditionError, UnrepresentableError
from .flow import ContractionConstants, Trail, contraction_constants, flow_shift, fs_distance, verify_constants
from .h2 import H2Point, Mobius, h2_exp

Word = tuple


@dataclass(frozen=True)
class GroupAction:
    """Finitely many labelled isometries acting on a space.

    ``reduce`` maps a word to a canonical form of the group element it
    represents; two words are the same element iff their reductions agree.
    ``sphere(rng, x0, r)`` draws a point ``y`` with ``l(c_{x0,y}) = r``.
    ``dps`` switches evaluation to mpmath at that many digits.
    """

    name: str
    space: BicombingSpace
    generators: dict[str, Callable[[Any], Any]]
    inverse: dict[str, str]
    reduce: Callable[[Word], Any]
    sphere: Callable[[np.random.Generator, Any, float], Any]
    base_point: Any
    dim: int = 2
    dps: int | None = None

    def __post_init__(self):
        self.generators.setdefault("e", lambda x: x)
        self.inverse.setdefault("e", "e")
        for k, v in self.inverse.items():
            if self.inverse.get(v) != k:
                raise DomainError(f"inverse labels are not paired: {k} -> {v}")

    def act(self, word: Word, x):
        for label in reversed(word):
            x = self.generators[label](x)
        return x

    def inv(self, word: Word) -> Word:
        return tuple(self.inverse[label] for label in reversed(word))

    def same(self, u: Word, v: Word) -> bool:
        return self.reduce(u) == self.reduce(v)

    def precision(self):
        return mpmath.workdps(self.dps) if self.dps else contextlib.nullcontext()


@dataclass(frozen=True)
class HomotopyWord:
    """``(g_j, t_j, g_{j-1}, ..., t_1, g_0)``; ``gs[0]`` is ``g_j`` and ``ts[0]`` is ``t_j``."""

    gs: tuple[Word, ...]
    ts: tuple[float, ...]

    def __post_init__(self):
        if len(self.gs) != len(self.ts) + 1:
            raise DomainError("a homotopy word alternates group elements and times")
        if any(not (0 <= t <= 1) for t in self.ts):
            raise DomainError("homotopy times must lie in [0, 1]")

    def product(self) -> Word:
        return tuple(itertools.chain.from_iterable(self.gs))

    def to_dict(self) -> dict:
        return {"gs": [list(g) for g in self.gs], "ts": list(self.ts)}


@dataclass(frozen=True)
class TransferConfig:
    S: tuple[str, ...]
    k: int
    delta: float
    x0: Any
    beta_prime: float
    beta: float
    target: float
    consts: ContractionConstants
    N: int

    @property
    def T(self) -> float:
        return self.consts.T

    @property
    def R(self) -> float:
        return self.consts.r

    def to_dict(self) -> dict:
        return {"S": list(self.S), "k": self.k, "delta": self.delta, "beta_prime": self.beta_prime,
                "beta": self.beta, "target": self.target, "T": self.T, "R": self.R, "N": self.N,
                "constants": {k: getattr(self.consts, k) for k in ("r_prime", "delta_prime", "r_double_prime")}}


def p_radius_membership(space: BicombingSpace, x0, R: float, y) -> bool:
    if R < 0:
        raise DomainError("R must be nonnegative")
    return space.length(x0, y) <= R


def retract_H(space: BicombingSpace, x0, R: float, x, t: float):
    """``c_{x0,x}((1-t)(R - l) + l)`` with ``l = l(c_{x0,x})``; fixes ``P_R(x0)`` pointwise."""
    if not 0 <= t <= 1:
        raise DomainError("t must lie in [0, 1]")
    c = Trail(space, x0, x)
    l = c.length
    if l <= R:
        return x
    return c((1 - t) * (R - l) + l)


def omega_eval(action: GroupAction, R: float, w: HomotopyWord, x):
    """``Omega(g_0, x) = g_0 x`` and ``Omega(g_i, t_i, ...) = g_i H_{t_i}(Omega(...))``."""
    x0, space = action.base_point, action.space
    y = action.act(w.gs[-1], x)
    for g, t in zip(reversed(w.gs[:-1]), reversed(w.ts)):
        y = action.act(g, retract_H(space, x0, R, y, t))
    return y


def homotopy_action_eval(action: GroupAction, R: float, w: HomotopyWord, x, check: bool = True):
    """``Psi = H_0 o Omega`` on ``P_R(x0)``."""
    space, x0 = action.space, action.base_point
    if check and space.length(x0, x) > R * (1 + 1e-12):
        raise PreconditionError("point lies outside P_R(x0)")
    return retract_H(space, x0, R, omega_eval(action, R, w, x), 0.0)


def iota(action: GroupAction, g: Word, x) -> Trail:
    """``iota(g, x) = c_{g x0, g x}``."""
    return Trail(action.space, action.act(g, action.base_point), action.act(g, x))


# -- factorizations ------------------------------------------------------------


def factorizations(action: GroupAction, a: Word, S: Sequence[str], k: int) -> list[tuple[str, ...]]:
    """All ``(g_k, ..., g_0)`` in ``S^{k+1}`` with ``g_k ... g_0 = a``."""
    target = action.reduce(a)
    return [w for w in itertools.product(S, repeat=k + 1) if action.reduce(w) == target]


def sample_F(action: GroupAction, R: float, a: Word, S: Sequence[str], k: int, m: int, seed: int = 0) -> list[HomotopyWord]:
    """``m`` random members of ``F_a(Psi, S, k)``: a factorization plus random times."""
    facts = factorizations(action, a, S, k)
    if not facts:
        raise UnrepresentableError(f"{a} is not a product of {k + 1} elements of S")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(m):
        fw = facts[int(rng.integers(len(facts)))]
        out.append(HomotopyWord(tuple((g,) for g in fw), tuple(float(v) for v in rng.random(k))))
    return out


# -- constants ---------------------------------------------------------------


def transfer_constants(action: GroupAction, A: ConvexityModulus, f: LengthModulus, S: Sequence[str], k: int,
                       delta: float) -> TransferConfig:
    """``beta' = max d(g x0, h x0)`` over ``S``, ``beta = (k+1) f(beta')``, and ``(T, R)`` from the
    contraction recipe at distance ``delta / (e^beta (k+1))`` with ``L = beta``."""
    if "e" not in S:
        raise DomainError("S must contain e")
    if k < 0 or delta <= 0:
        raise DomainError("need k >= 0 and delta > 0")
    space, x0 = action.space, action.base_point
    with action.precision():
        pts = [action.act((s,), x0) for s in S]
        beta_prime = max(float(space.dist(p, q)) for p in pts for q in pts)
    beta = (k + 1) * f(beta_prime)
    target = delta / (math.exp(beta) * (k + 1))
    consts = contraction_constants(beta_prime, max(beta, 1e-12), target, A, f)
    if not all(verify_constants(consts, A, f).values()):
        raise AssertionError("contraction constants failed re-verification")
    return TransferConfig(tuple(S), k, delta, x0, beta_prime, beta, target, consts, 2 * action.dim + 1)


# -- condition (*) -------------------------------------------------------------


def _transfer_instance(action: GroupAction, cfg: TransferConfig, z, w: HomotopyWord, quad_tol: float):
    """Follow the induction along the word; returns per-step distances, bounds and the witness."""
    space, x0, R, T = action.space, action.base_point, cfg.R, cfg.T
    k = len(w.ts)
    gs = list(reversed(w.gs))  # g_0, g_1, ...
    ts = list(reversed(w.ts))  # t_1, t_2, ...
    start = flow_shift(Trail(space, x0, z), T)
    tau = 0.0
    steps = []
    omega = None
    prefix: Word = ()
    for m, g in enumerate(gs):
        # the point the recipe is applied to at this step
        x = z if m == 0 else retract_H(space, x0, R, omega, ts[m - 1])
        gi = action.inv(g)
        tau_m = float(space.length(action.act(gi, x0), x)) - float(space.length(x0, x))
        tau += tau_m
        omega = action.act(g, x)
        prefix = g + prefix
        fm = retract_H(space, x0, R, omega, 0.0)
        inv_prefix = action.inv(prefix)
        other = flow_shift(iota(action, inv_prefix, fm), T + tau)
        fd = fs_distance(start, other, quad_tol)
        steps.append({"m": m, "tau_m": tau_m, "tau": tau, "d_fs": float(fd.value), "error_bound": float(fd.error_bound),
                      "bound": (m + 1) * cfg.delta / (k + 1)})
    return steps, prefix, fm


def check_transfer_condition(action: GroupAction, A: ConvexityModulus, f: LengthModulus, cfg: TransferConfig, n: int,
                             seed: int = 0, quad_tol: float = 1e-9, grid: int = 201, workers: int = 1) -> PropertyReport:
    """Condition (*) on sampled ``(z, word, times)`` with the induction witness ``tau``.

    Each step ``m`` must stay within ``(m+1) delta / (k+1)`` plus quadrature
    error.  If the witness ever failed, a grid over ``[-beta, beta]`` is
    searched and the report says so.
    """
    space, x0, k = action.space, action.base_point, cfg.k
    S = cfg.S

    def task(rng, i):
        with action.precision():
            # half the samples sit in the shell where H_0 and the flow window interact
            lo = max(cfg.T - 20.0, 0.0) if i % 2 else 0.0
            z = action.sphere(rng, x0, float(rng.uniform(lo, cfg.R)))
            gs = tuple((S[int(rng.integers(len(S)))],) for _ in range(k + 1))
            w = HomotopyWord(gs, tuple(float(v) for v in rng.random(k)))
            steps, a, fz = _transfer_instance(action, cfg, z, w, quad_tol)
            worst_step = max(s["d_fs"] - s["bound"] - s["error_bound"] for s in steps)
            final = steps[-1]
            used = "witness"
            tau_ok = abs(final["tau"]) <= cfg.beta + 1e-9
            v = max(worst_step, final["d_fs"] - cfg.delta - final["error_bound"])
            if v > 0 or not tau_ok:
                start = flow_shift(Trail(space, x0, z), cfg.T)
                best = math.inf
                for tau in np.linspace(-cfg.beta, cfg.beta, grid):
                    other = flow_shift(iota(action, action.inv(a), fz), cfg.T + float(tau))
                    fd = fs_distance(start, other, quad_tol)
                    best = min(best, fd.value - cfg.delta - fd.error_bound)
                used = "grid"
                v = best if tau_ok or best <= 0 else max(best, 0.0)
            return v, {"z": z, "word": w.to_dict(), "steps": steps, "tau_source": used}

    res = sample_map(task, n, seed, workers)
    worst = max(res, key=lambda r: r[0])
    sources = sorted({r[1]["tau_source"] for r in res})
    return PropertyReport("transfer_condition", f"{action.name}", seed, n, 0.0, float(worst[0]), worst[1], n,
                          mode=space.mode, extra={"config": cfg.to_dict(), "tau_sources": sources})


# -- strong homotopy action axioms ------------------------------------------------


def _random_word(rng, S, length) -> HomotopyWord:
    gs = tuple((S[int(rng.integers(len(S)))],) for _ in range(length))
    return HomotopyWord(gs, tuple(float(v) for v in rng.random(length - 1)))


def check_homotopy_axioms(action: GroupAction, cfg: TransferConfig, n: int, seed: int = 0, tol: float = 1e-8,
                          max_len: int = 3, workers: int = 1) -> PropertyReport:
    """Axioms (1)-(6) of a strong homotopy action for ``Psi = H_0 o Omega`` on sampled words."""
    space, x0, R, S = action.space, action.base_point, cfg.R, cfg.S

    def psi(w, x):
        return homotopy_action_eval(action, R, w, x, check=False)

    def task(rng, i):
        with action.precision():
            x = action.sphere(rng, x0, R * float(rng.uniform(0.0, 1.0)))
            L = int(rng.integers(2, max_len + 1))
            w = _random_word(rng, S, L)
            l = int(rng.integers(0, L - 1))  # position of a time slot: ts[l] sits between gs[l] and gs[l+1]
            gs, ts = list(w.gs), list(w.ts)
            viol = {}
            # (1) time 0 splits the word
            lhs = psi(HomotopyWord(tuple(gs), tuple(ts[:l] + [0.0] + ts[l + 1:])), x)
            inner = psi(HomotopyWord(tuple(gs[l + 1:]), tuple(ts[l + 1:])), x)
            viol["1"] = space.dist(lhs, psi(HomotopyWord(tuple(gs[: l + 1]), tuple(ts[:l])), inner))
            # (2) time 1 multiplies neighbours
            lhs = psi(HomotopyWord(tuple(gs), tuple(ts[:l] + [1.0] + ts[l + 1:])), x)
            merged = gs[:l] + [gs[l] + gs[l + 1]] + gs[l + 2:]
            viol["2"] = space.dist(lhs, psi(HomotopyWord(tuple(merged), tuple(ts[:l] + ts[l + 1:])), x))
            # (3) leading e drops with its time
            lhs = psi(HomotopyWord((("e",),) + tuple(gs), (float(rng.random()),) + tuple(ts)), x)
            viol["3"] = space.dist(lhs, psi(w, x))
            # (4) an interior e multiplies the surrounding times
            s1, s2 = float(rng.random()), float(rng.random())
            lhs = psi(HomotopyWord(tuple(gs[: l + 1]) + (("e",),) + tuple(gs[l + 1:]),
                                   tuple(ts[:l]) + (s1, s2) + tuple(ts[l + 1:])), x)
            rhs = psi(HomotopyWord(tuple(gs), tuple(ts[:l]) + (s1 * s2,) + tuple(ts[l + 1:])), x)
            viol["4"] = space.dist(lhs, rhs)
            # (5) trailing e drops with its time
            lhs = psi(HomotopyWord(tuple(gs) + (("e",),), tuple(ts) + (float(rng.random()),)), x)
            viol["5"] = space.dist(lhs, psi(w, x))
            # (6) Psi(e, x) = x
            viol["6"] = space.dist(psi(HomotopyWord((("e",),), ()), x), x)
            viol = {key: float(v) for key, v in viol.items()}
            worst = max(viol, key=viol.get)
            return viol[worst], {"axiom": worst, "word": w.to_dict(), "slot": l, "x": x, "all": viol}

    res = sample_map(task, n, seed, workers)
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("homotopy_axioms", action.name, seed, n, tol, worst[0], worst[1], n, mode=space.mode)


def check_semigroup(action: GroupAction, cfg: TransferConfig, n: int, seed: int = 0, tol: float = 1e-8,
                    workers: int = 1) -> PropertyReport:
    """``H_t o H_t' = H_{t t'}`` on points inside and outside ``P_R(x0)``, error relative to ``l(c_{x0,x})``."""
    space, x0, R = action.space, action.base_point, cfg.R

    def task(rng, i):
        with action.precision():
            x = action.sphere(rng, x0, R * float(rng.uniform(0.5, 2.0)))
            t, t2 = float(rng.random()), float(rng.random())
            lhs = retract_H(space, x0, R, retract_H(space, x0, R, x, t2), t)
            # relative to the distance from x0: float coordinates near P_R carry absolute error ~ R * eps
            v = float(space.dist(lhs, retract_H(space, x0, R, x, t * t2))) / max(1.0, float(space.length(x0, x)))
            return v, {"x": x, "t": t, "t2": t2}

    res = sample_map(task, n, seed, workers)
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("H_semigroup", action.name, seed, n, tol, worst[0], worst[1], n, mode=space.mode)


def check_iota_equivariance(action: GroupAction, cfg: TransferConfig, n: int, seed: int = 0, tol: float = 1e-9,
                            times: int = 100, workers: int = 1) -> PropertyReport:
    """``iota(h g, x)(t) = h iota(g, x)(t)`` at sampled times, error relative to the trail length."""
    space, x0, S = action.space, action.base_point, cfg.S

    def task(rng, i):
        with action.precision():
            x = action.sphere(rng, x0, cfg.R * float(rng.uniform(0, 1)))
            g = tuple(S[int(rng.integers(len(S)))] for _ in range(2))
            h = tuple(S[int(rng.integers(len(S)))] for _ in range(2))
            c, d = iota(action, h + g, x), iota(action, g, x)
            worst = 0.0
            for t in np.linspace(-1.0, d.length + 1.0, times):
                gap = float(space.dist(c(float(t)), action.act(h, d(float(t)))))
                worst = max(worst, gap / max(1.0, d.length))
            return worst, {"x": x, "g": g, "h": h}

    res = sample_map(task, n, seed, workers)
    worst = max(res, key=lambda r: r[0])
    return PropertyReport("iota_equivariance", action.name, seed, n, tol, worst[0], worst[1], n, mode=space.mode)


# -- S^1 membership -------------------------------------------------------------


def _t_vectors(k: int, m: int, rng) -> list[tuple[float, ...]]:
    out = [tuple([0.0] * k), tuple([1.0] * k)]
    out += [tuple(float(v) for v in rng.random(k)) for _ in range(m)]
    return out


def s1_witness_check(action: GroupAction, cfg: TransferConfig, gx: tuple[Word, Any], hy: tuple[Word, Any],
                     tol: float = 1e-9, m: int = 8, seed: int = 0) -> PropertyReport:
    """Search for ``a, b in S``, ``f in F_a``, ``f' in F_b`` with ``f(x) = f'(y)`` and ``h = g a^-1 b``.

    Passes only with an explicit witness, which is stored in the report.
    """
    (g, x), (h, y) = gx, hy
    S, k, R = cfg.S, cfg.k, cfg.R
    rng = np.random.default_rng(seed)
    tvecs = _t_vectors(k, m, rng)
    with action.precision():
        for a in S:
            for b in S:
                if not action.same(g + action.inv((a,)) + (b,), h):
                    continue
                fa, fb = factorizations(action, (a,), S, k), factorizations(action, (b,), S, k)
                imgs_b = [(wb, tb, homotopy_action_eval(action, R, HomotopyWord(tuple((s,) for s in wb), tb), y, False))
                          for wb in fb for tb in tvecs]
                for wa in fa:
                    for ta in tvecs:
                        fx = homotopy_action_eval(action, R, HomotopyWord(tuple((s,) for s in wa), ta), x, False)
                        for wb, tb, fy in imgs_b:
                            if float(action.space.dist(fx, fy)) <= tol:
                                wit = {"a": a, "b": b, "f": {"word": wa, "ts": ta}, "f_prime": {"word": wb, "ts": tb}}
                                return PropertyReport("s1_witness", action.name, seed, 1, tol, 0.0, wit, 1,
                                                      extra={"member": True})
    return PropertyReport("s1_witness", action.name, seed, 1, tol, math.inf, None, 1, extra={"member": False})


def s1_forward_instance(action: GroupAction, cfg: TransferConfig, rng: np.random.Generator):
    """A pair known to be in ``S^1``: ``b = e``, ``y = f(x)`` for ``f in F_a`` with zero times, ``h = g a^-1``."""
    S, k, R = cfg.S, cfg.k, cfg.R
    x = action.sphere(rng, action.base_point, R * float(rng.uniform(0, 1)))
    g = (S[int(rng.integers(len(S)))],)
    a = S[int(rng.integers(len(S)))]
    wa = factorizations(action, (a,), S, k)[int(rng.integers(len(factorizations(action, (a,), S, k))))]
    y = homotopy_action_eval(action, R, HomotopyWord(tuple((s,) for s in wa), tuple([0.0] * k)), x, False)
    return (g, x), (g + action.inv((a,)), y)


# -- reference actions ---------------------------------------------------------


def _abelian_reduce(basis: dict[str, tuple[int, ...]]):
    def reduce(word: Word):
        dim = len(next(iter(basis.values())))
        total = [0] * dim
        for label in word:
            if label != "e":
                total = [a + b for a, b in zip(total, basis[label])]
        return tuple(total)

    return reduce


def _free_reduce(inverse: dict[str, str]):
    def reduce(word: Word):
        out: list[str] = []
        for label in word:
            if label == "e":
                continue
            if out and inverse[out[-1]] == label:
                out.pop()
            else:
                out.append(label)
        return tuple(out)

    return reduce


def z2_action(x0: tuple[float, float] = (0.31, 0.17)) -> GroupAction:
    """``Z^2`` acting on the plane by unit translations."""
    from .spaces import euclidean_space

    space = euclidean_space(2)
    basis = {"e1": (1, 0), "E1": (-1, 0), "e2": (0, 1), "E2": (0, -1)}
    gens = {k: (lambda p, v=v: (p[0] + v[0], p[1] + v[1])) for k, v in basis.items()}
    inverse = {"e1": "E1", "E1": "e1", "e2": "E2", "E2": "e2"}

    return GroupAction("Z2-plane", space, gens, inverse, _abelian_reduce(basis), space.shoot, x0, dim=2)


def h2_action(length: float = 0.05, R_hint: float = 500.0) -> GroupAction:
    """Two hyperbolic translations of the half-plane, evaluated in mpmath.

    The precision grows with the radius of ``P_R(x0)``: a point at distance
    ``R`` has coordinates that resolve only ``e^{-R}`` of the boundary.
    """
    from .spaces import h2_space

    dps = int(R_hint / 2.3) + 30
    with mpmath.workdps(dps):
        mp = mpmath.mpf
        a = Mobius.translation(mp(length), mp(-1), mp(1))
        b = Mobius.translation(mp(length), mp("-0.5"), mp(3))
        gens = {"a": a, "A": a.inverse(), "b": b, "B": b.inverse()}
        x0 = H2Point(mp(0), mp(0))
    inverse = {"a": "A", "A": "a", "b": "B", "B": "b"}

    def sphere(rng, center, r):
        return h2_exp(center, mpmath.mpf(r), mpmath.mpf(float(rng.uniform(-math.pi, math.pi))))

    space = h2_space()
    return GroupAction("H2-two-translations", space, dict(gens), inverse, _free_reduce(inverse), sphere, x0, dim=2,
                       dps=dps)
