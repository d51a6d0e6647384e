"""Concrete bicombed spaces and the name registry used by the CLI."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .core import BicombingSpace
from .errors import ConfigurationError
from .h2 import Mobius, h2_distance, h2_geodesic, random_h2_point, shoot_upward


def euclidean_space(dim: int = 2) -> BicombingSpace:
    """``R^dim`` with straight lines; integer translations along the axes are the isometries."""

    def dist(p, q):
        return math.dist(p, q)

    def bicombe(p, q, t):
        return tuple((1 - t) * a + t * b for a, b in zip(p, q))

    def sampler(rng, scale):
        return tuple(float(v) for v in rng.uniform(-scale, scale, dim))

    def shift(k, sign):
        return lambda p: tuple(v + sign if i == k else v for i, v in enumerate(p))

    def shoot(rng, p, length):
        v = rng.normal(size=dim)
        v *= length / np.linalg.norm(v)
        return tuple(a + float(b) for a, b in zip(p, v))

    isos = {f"{'+' if s > 0 else '-'}e{k + 1}": shift(k, s) for k in range(dim) for s in (1, -1)}
    return BicombingSpace(f"euclidean{dim}", dist, bicombe, sampler, isometries=isos, tol=1e-12, shoot=shoot)


def h2_space(scale: float = 2.5) -> BicombingSpace:
    """The hyperbolic plane with its geodesic bicombing."""
    isos = {
        "translate(0.7,-2,3)": Mobius.translation(0.7, -2.0, 3.0),
        "translate(1.3,vertical)": Mobius.translation(1.3),
        "parabolic(+1)": Mobius(1.0, 1.0, 0.0, 1.0),
    }

    def sampler(rng, s):
        return random_h2_point(rng, radius=s)

    return BicombingSpace("h2", h2_distance, h2_geodesic, sampler, isometries=dict(isos), tol=1e-9, scale=scale,
                          shoot=shoot_upward)


# -- negative controls ----------------------------------------------------------


def frozen_bicombing_space() -> BicombingSpace:
    """Broken: the 'bicombing' ignores ``t`` and stays at the start point."""
    base = euclidean_space(2)
    return BicombingSpace("broken-frozen", base.dist, lambda p, q, t: p, base.sampler, tol=1e-12)


def non_isometry_space() -> BicombingSpace:
    """Euclidean plane with a dilation injected among the isometries."""
    base = euclidean_space(2)
    isos = dict(base.isometries)
    isos["dilate2"] = lambda p: tuple(2 * v for v in p)
    return BicombingSpace("broken-isometry", base.dist, base.bicombe, base.sampler, isometries=isos, tol=1e-12)


def quadratic_speed_space() -> BicombingSpace:
    """Broken: correct endpoints but not constant speed (``t -> t^2``)."""
    base = euclidean_space(2)
    return BicombingSpace("broken-speed", base.dist, lambda p, q, t: base.bicombe(p, q, t * t), base.sampler,
                          tol=1e-12)


def _sl2_space():
    from .sl2 import sl2_space

    return sl2_space()


REGISTRY: dict[str, Callable[[], BicombingSpace]] = {
    "euclidean2": lambda: euclidean_space(2),
    "euclidean3": lambda: euclidean_space(3),
    "h2": h2_space,
    "sl2r-model": _sl2_space,
    "broken-frozen": frozen_bicombing_space,
    "broken-isometry": non_isometry_space,
    "broken-speed": quadratic_speed_space,
}


def get_space(name: str) -> BicombingSpace:
    if name.startswith("product:"):
        from .core import linear_modulus, product_space

        left, right = name[len("product:"):].split("*")
        return product_space(get_space(left), linear_modulus(), get_space(right), linear_modulus())[0]
    try:
        return REGISTRY[name]()
    except KeyError:
        raise ConfigurationError(f"unknown space {name!r}; known: {sorted(REGISTRY)}") from None


def sample_points(space: BicombingSpace, n: int, seed: int) -> list:
    return [space.sample(np.random.default_rng([seed, i])) for i in range(n)]
