"""Pointwise difference calculus on weighted graphs."""

from __future__ import annotations

import math
from typing import Callable, Mapping, Sequence

import numpy as np

from .graph_core import (FiniteRegion, RadialProfile, WeightedGraph, materialize_ball)


class MissingValueError(KeyError):
    """A function was evaluated at a vertex where it has no value."""


class RegionFunction:
    """Values on the closure of a region, callable on vertices."""

    def __init__(self, region: FiniteRegion, values):
        self.region = region
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (region.n_closure,):
            raise ValueError("need one value per closure vertex")

    def __call__(self, x) -> float:
        try:
            return float(self.values[self.region.index[tuple(x)]])
        except KeyError:
            raise MissingValueError(x) from None


def _evaluator(f) -> Callable:
    if isinstance(f, Mapping):
        def get(x):
            try:
                return f[tuple(x)]
            except KeyError:
                raise MissingValueError(x) from None
        return get
    return f


def laplacian(g: WeightedGraph, f, x) -> float:
    """``(1/mu(x)) * sum_y (f(y) - f(x)) w(x, y)``, summed with ``math.fsum``."""
    f = _evaluator(f)
    x = g.vertex(x)
    fx = f(x)
    terms = [w * (f(y) - fx) for y, w in g.neighbors(x)]
    return math.fsum(terms) / g.measure(x)


def weighted_laplacian(g: WeightedGraph, w: Callable, f, x) -> float:
    wx = w(g.vertex(x))
    if not wx > 0:
        raise ValueError(f"weight must be positive, got {wx} at {x}")
    return laplacian(g, f, x) / wx


def gradient(f, x, y) -> float:
    f = _evaluator(f)
    return f(y) - f(x)


def product_rule_residual(f, h, x, y) -> float:
    """``grad(fh) - [f(x) grad h + grad f h(y)]`` on the edge ``(x, y)``."""
    f, h = _evaluator(f), _evaluator(h)
    lhs = f(y) * h(y) - f(x) * h(x)
    rhs = f(x) * (h(y) - h(x)) + (f(y) - f(x)) * h(y)
    return lhs - rhs


def radial_laplacian(profile: RadialProfile, f: Sequence[float], m: int) -> float:
    """Laplacian of a radial function at shell ``m`` from its shell values.

    Shell 0 has no inner neighbours, so only the outward term appears there.
    """
    if not 0 <= m < min(len(f) - 1, profile.max_shell + 1):
        raise IndexError(f"shell {m} outside 0..{min(len(f) - 2, profile.max_shell)}")
    up = profile.d_plus[m] * (f[m + 1] - f[m])
    if m == 0:
        return float(up)
    return float(up + profile.d_minus[m] * (f[m - 1] - f[m]))


def check_integration_by_parts(g: WeightedGraph, region: FiniteRegion, f, h) -> float:
    """Absolute residual of summation by parts for ``f`` supported in the interior.

    Returns ``|sum_x (Lap f)(x) h(x) mu(x) + 1/2 sum_{x,y} grad f grad h w|``
    over the closure, with ``f`` extended by zero.  Raises ``ValueError`` if
    ``f`` does not vanish on the boundary.
    """
    fv = np.array([f(x) for x in region.closure], dtype=float)
    hv = np.array([h(x) for x in region.closure], dtype=float)
    n = region.n_interior
    if np.any(fv[n:] != 0.0):
        raise ValueError("f must vanish on the boundary layer")
    table = {x: v for x, v in zip(region.closure, fv)}
    fz = lambda y: table.get(tuple(y), 0.0)
    lhs = []
    for x, hx in zip(region.closure, hv):
        lhs.append(laplacian(g, fz, x) * hx * g.measure(x))
    # grad f vanishes on edges with both ends outside the support, so the
    # interior edge list (each direction once) covers the double sum
    idx_of = region.index
    rhs = []
    for x in region.interior:
        for y, w in g.neighbors(x):
            gf = fz(y) - fz(x)
            j = idx_of[y]
            gh = hv[j] - hv[idx_of[x]]
            rhs.append(gf * gh * w)
            if j >= n:
                rhs.append(gf * gh * w)  # reverse direction from the boundary side
    return abs(math.fsum(lhs) + 0.5 * math.fsum(rhs))


def lattice_neighbor_sums(n: int, x) -> tuple[int, int]:
    """Integer sums of ``|y|^2 - |x|^2`` and its square over the lattice neighbours."""
    x = tuple(int(c) for c in x)
    if len(x) != n:
        raise ValueError("dimension mismatch")
    s1 = s2 = 0
    for k in range(n):
        for step in (-1, 1):
            d = (x[k] + step) ** 2 - x[k] ** 2
            s1 += d
            s2 += d * d
    return s1, s2


def compact_support_laplacian_bound(g: WeightedGraph, rho: Callable, u: Callable, origin,
                                    r: float, sample: Sequence, s: int = 1):
    """Pointwise sides of ``|Lap u(x)|/rho(x) <= M * max_{B_{r+2s}}(Deg/rho) * 1_{B_{r+2s}}(x)``.

    ``u`` must vanish outside ``B_r(origin)`` (combinatorial distance) and
    ``M = max |u|``.  Returns ``(lhs, rhs)`` arrays over ``sample``.
    """
    seed = (g.vertex(origin),)
    big = materialize_ball(g, seed, r + 2 * s)
    dist = dict(zip(big.closure, big.shell))
    ball = [x for x in big.interior if dist[x] < r]
    for x in sample:
        d = dist.get(g.vertex(x))
        if (d is None or d >= r) and u(g.vertex(x)) != 0:
            raise ValueError(f"u does not vanish outside the ball at {x}")
    uf = lambda y: u(y) if dist.get(y, r) < r else 0.0
    sup_u = max(abs(u(x)) for x in ball)
    sup_ratio = max(g.weighted_degree(x) / rho(x) for x in big.interior)
    lhs, rhs = [], []
    for x in sample:
        x = g.vertex(x)
        lhs.append(abs(laplacian(g, uf, x)) / rho(x))
        rhs.append(sup_u * sup_ratio if dist.get(x, r + 2 * s) < r + 2 * s else 0.0)
    return np.array(lhs), np.array(rhs)
