"""Weighted graphs given by neighbour oracles, finite balls, and radial profiles.

A graph is never stored in full.  Each family answers ``neighbors(x)`` and
``measure(x)`` on demand, and a :class:`FiniteRegion` is cut out of it by a
breadth-first search (or a vectorised enumeration for lattices).
"""

from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

Vertex = tuple

DEFAULT_MAX_VERTICES = 200_000
EXHAUSTIVE_SHELL_LIMIT = 4096
PROFILE_RTOL = 1e-12


def max_vertices() -> int:
    """Materialisation budget, overridable through ``GRAPHHEAT_MAX_VERTICES``."""
    return int(os.environ.get("GRAPHHEAT_MAX_VERTICES", DEFAULT_MAX_VERTICES))


class GraphError(Exception):
    """Base class for graph construction and query errors."""


class BudgetExceeded(GraphError):
    pass


class TruncatedGraph(GraphError):
    """Raised when a query needs shells beyond the declared depth."""


class NotWeaklySymmetric(GraphError):
    def __init__(self, shell: int, detail: str):
        super().__init__(f"degrees differ within shell {shell}: {detail}")
        self.shell = shell


# --------------------------------------------------------------------------
# families


class WeightedGraph:
    """Oracle interface.  Subclasses override :meth:`neighbors` and :meth:`measure`."""

    family = "custom"
    root: Vertex | None = None

    def vertex(self, x) -> Vertex:
        return tuple(x)

    def neighbors(self, x) -> list[tuple[Vertex, float]]:
        raise NotImplementedError

    def measure(self, x) -> float:
        raise NotImplementedError

    def degree(self, x) -> float:
        return math.fsum(w for _, w in self.neighbors(x))

    def weighted_degree(self, x) -> float:
        return self.degree(x) / self.measure(x)

    def shell_of(self, x) -> int | None:
        """Distance to the root when it is known structurally, else ``None``."""
        return None

    def descriptor(self) -> dict:
        return {"family": self.family}


class Lattice(WeightedGraph):
    """The integer lattice with unit weights and measure ``2n``."""

    family = "lattice"

    def __init__(self, n: int):
        if int(n) != n or n < 1:
            raise ValueError(f"lattice dimension must be a positive integer, got {n!r}")
        self.n = int(n)
        self.root = (0,) * self.n

    def vertex(self, x) -> Vertex:
        if isinstance(x, (int, np.integer)):
            x = (int(x),)
        x = tuple(int(c) for c in x)
        if len(x) != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {x}")
        return x

    def neighbors(self, x):
        x = self.vertex(x)
        out = []
        for k in range(self.n):
            for step in (-1, 1):
                y = list(x)
                y[k] += step
                out.append((tuple(y), 1.0))
        return out

    def measure(self, x) -> float:
        return 2.0 * self.n

    def shell_of(self, x) -> int:
        return sum(abs(c) for c in self.vertex(x))

    def descriptor(self):
        return {"family": self.family, "n": self.n}


class _ShellFamily(WeightedGraph):
    """Common code for families whose vertices are ``(shell, ordinal)`` pairs."""

    depth: int

    def __init__(self, depth: int):
        if depth < 1:
            raise ValueError("depth must be at least 1")
        self.depth = int(depth)
        self.root = (0, 0)

    def shell_size(self, m: int) -> int:
        raise NotImplementedError

    def vertex(self, x) -> Vertex:
        m, k = (int(c) for c in x)
        if not 0 <= m <= self.depth or not 0 <= k < self.shell_size(m):
            raise ValueError(f"{(m, k)} is not a vertex of this {self.family}")
        return (m, k)

    def shell_of(self, x) -> int:
        return int(x[0])

    def shell_vertices(self, m: int, ordinals: Iterable[int] | None = None):
        ks = range(self.shell_size(m)) if ordinals is None else ordinals
        return [(m, k) for k in ks]


class SphericalTree(_ShellFamily):
    """Rooted tree where every vertex of shell ``m`` has ``branching(m)`` children."""

    family = "tree"

    def __init__(self, branching: Callable[[int], int], depth: int, label: str | None = None):
        super().__init__(depth)
        self.label = label
        self._b = []
        self._card = [1]
        for m in range(self.depth + 1):
            b = int(branching(m))
            if b < 1:
                raise ValueError(f"branching number at shell {m} must be >= 1, got {b}")
            self._b.append(b)
            self._card.append(self._card[-1] * b)

    def branching(self, m: int) -> int:
        return self._b[m]

    def shell_size(self, m: int) -> int:
        return self._card[m]

    def neighbors(self, x):
        m, k = self.vertex(x)
        if m >= self.depth:
            raise TruncatedGraph(f"children of shell {m} lie beyond depth {self.depth}")
        out = []
        if m > 0:
            out.append(((m - 1, k // self._b[m - 1]), 1.0))
        b = self._b[m]
        out.extend(((m + 1, k * b + i), 1.0) for i in range(b))
        return out

    def measure(self, x) -> float:
        return 1.0

    def descriptor(self):
        return {"family": self.family, "branching": self.label, "depth": self.depth}


class AntiTree(_ShellFamily):
    """Shells of prescribed size, every vertex joined to all of both adjacent shells.

    ``convention="A"`` chooses layer weights and shell measures so that the
    outer degree on shell ``m`` equals ``s(m-1)`` and the inner degree equals
    ``s(m+1)``.  ``convention="B"`` uses unit weights and unit measure, which
    gives the reverse assignment.
    """

    family = "antitree"

    def __init__(self, sphere_size: Callable[[int], int], convention: str = "A",
                 depth: int = 64, label: str | None = None):
        super().__init__(depth)
        if convention not in ("A", "B"):
            raise ValueError("convention must be 'A' or 'B'")
        self.convention = convention
        self.label = label
        self._s = [int(sphere_size(m)) for m in range(self.depth + 2)]
        if self._s[0] != 1:
            raise ValueError(f"the root shell must hold one vertex, got {self._s[0]}")
        if min(self._s) < 1:
            raise ValueError("every shell must be non-empty")
        s = self._s
        if convention == "A":
            c = float(s[0] * s[1] ** 2 * s[2])
            self._w = [c / float(s[m] * s[m + 1]) ** 2 for m in range(self.depth + 1)]
            self._mu = [1.0] + [c / float(s[m - 1] * s[m] ** 2 * s[m + 1])
                                for m in range(1, self.depth + 1)]
        else:
            self._w = [1.0] * (self.depth + 1)
            self._mu = [1.0] * (self.depth + 1)

    def shell_size(self, m: int) -> int:
        return self._s[m]

    def layer_weight(self, m: int) -> float:
        """Weight of every edge between shells ``m`` and ``m + 1``."""
        return self._w[m]

    def neighbors(self, x):
        m, k = self.vertex(x)
        if m >= self.depth:
            raise TruncatedGraph(f"shell {m + 1} lies beyond depth {self.depth}")
        out = []
        if m > 0:
            out.extend(((m - 1, i), self._w[m - 1]) for i in range(self._s[m - 1]))
        out.extend(((m + 1, i), self._w[m]) for i in range(self._s[m + 1]))
        return out

    def measure(self, x) -> float:
        return self._mu[self.vertex(x)[0]]

    def descriptor(self):
        return {"family": self.family, "sphere": self.label,
                "convention": self.convention, "depth": self.depth}


class RadialQuotient(_ShellFamily):
    """Path graph on shells carrying shell measures and inter-shell edge masses.

    The Laplacian of this path equals the radial Laplacian of the profile, so
    radial problems can be handed to the same region-based solvers.
    """

    family = "radial"

    def __init__(self, profile: "RadialProfile"):
        super().__init__(profile.max_shell)
        self.profile = profile
        self._mass = profile.edge_mass()

    def shell_size(self, m: int) -> int:
        return 1

    def neighbors(self, x):
        m, _ = self.vertex(x)
        if m >= self.depth:
            raise TruncatedGraph(f"profile stops at shell {self.depth}")
        out = [((m - 1, 0), float(self._mass[m - 1]))] if m > 0 else []
        out.append(((m + 1, 0), float(self._mass[m])))
        return out

    def measure(self, x) -> float:
        return float(self.profile.shell_measure[self.vertex(x)[0]])

    def descriptor(self):
        return {"family": self.family, "shells": self.depth + 1}


class CustomGraph(WeightedGraph):
    """Graph defined by user callables.  Symmetry is the caller's responsibility."""

    def __init__(self, neighbors: Callable, measure: Callable, root: Vertex | None = None,
                 label: str = "custom"):
        self._nb = neighbors
        self._mu = measure
        self.root = root
        self.label = label

    def neighbors(self, x):
        return [(tuple(y), float(w)) for y, w in self._nb(tuple(x))]

    def measure(self, x) -> float:
        return float(self._mu(tuple(x)))

    def descriptor(self):
        return {"family": self.family, "label": self.label}


def make_lattice(n: int) -> Lattice:
    return Lattice(n)


def make_spherical_tree(branching: Callable[[int], int], depth: int, label=None) -> SphericalTree:
    return SphericalTree(branching, depth, label)


def make_antitree(sphere_size: Callable[[int], int], convention: str = "A", depth: int = 64,
                  label=None) -> AntiTree:
    return AntiTree(sphere_size, convention, depth, label)


def parse_rule(text: str) -> Callable[[int], int]:
    """Integer sequence from a short descriptor.

    ``const:a`` gives ``a``; ``affine:a,b`` gives ``a + b*m``; ``list:v0,...,vk``
    gives ``v_m`` and repeats the last entry.
    """
    kind, _, args = text.partition(":")
    vals = [int(v) for v in args.split(",") if v.strip()]
    if kind == "const" and len(vals) == 1:
        return lambda m, a=vals[0]: a
    if kind == "affine" and len(vals) == 2:
        return lambda m, a=vals[0], b=vals[1]: a + b * m
    if kind == "list" and vals:
        return lambda m, v=tuple(vals): v[min(m, len(v) - 1)]
    raise ValueError(f"cannot parse integer rule {text!r}")


# --------------------------------------------------------------------------
# regions


@dataclass(eq=False)
class FiniteRegion:
    """Interior vertices of a ball plus their outer vertex boundary.

    Vertices are stored interior first and boundary second, each block in
    sorted order; array fields use that closure order.  The edge arrays list
    every edge leaving an interior vertex (``rows`` index the interior,
    ``cols`` the closure).
    """

    graph: WeightedGraph
    interior: list
    boundary: list
    shell: np.ndarray
    measure: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    seed: tuple = ()
    radius: float = 0.0
    metric: str = "combinatorial"
    coords: np.ndarray | None = None
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {v: i for i, v in enumerate(self.closure)}

    @property
    def closure(self) -> list:
        return self.interior + self.boundary

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    @property
    def n_closure(self) -> int:
        return len(self.interior) + len(self.boundary)

    @property
    def interior_measure(self) -> np.ndarray:
        return self.measure[: self.n_interior]

    @cached_property
    def degree(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.weights, minlength=self.n_interior)

    @cached_property
    def weighted_degree(self) -> np.ndarray:
        return self.degree / self.interior_measure

    def _layer_degree(self, step: int) -> np.ndarray:
        mask = self.shell[self.cols] == self.shell[self.rows] + step
        w = np.where(mask, self.weights, 0.0)
        return np.bincount(self.rows, weights=w, minlength=self.n_interior) / self.interior_measure

    @cached_property
    def outer_degree(self) -> np.ndarray:
        return self._layer_degree(+1)

    @cached_property
    def inner_degree(self) -> np.ndarray:
        return self._layer_degree(-1)

    @cached_property
    def norm_sq(self) -> np.ndarray:
        """Squared Euclidean distance to the seed (lattices only)."""
        if self.coords is None:
            raise GraphError("Euclidean norms need lattice coordinates")
        c = self.coords - np.asarray(self.seed[0])
        return np.einsum("ij,ij->i", c, c).astype(float)

    @cached_property
    def _incidence(self) -> sp.csr_matrix:
        e = len(self.rows)
        return sp.csr_matrix((np.ones(e), (self.rows, np.arange(e))), shape=(self.n_interior, e))

    def laplacian(self, values: np.ndarray, chunk: int = 64) -> np.ndarray:
        """Laplacian on the interior of closure values (1-d or time-by-vertex)."""
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            d = (vals[self.cols] - vals[self.rows]) * self.weights
            return np.bincount(self.rows, weights=d, minlength=self.n_interior) / self.interior_measure
        out = np.empty((vals.shape[0], self.n_interior))
        for a in range(0, vals.shape[0], chunk):
            block = vals[a:a + chunk]
            d = (block[:, self.cols] - block[:, self.rows]) * self.weights
            out[a:a + chunk] = (self._incidence @ d.T).T / self.interior_measure
        return out

    @cached_property
    def stiffness(self) -> sp.csc_matrix:
        """Interior block of the Dirichlet form: ``deg`` on the diagonal, ``-w`` off it."""
        n = self.n_interior
        inner = self.cols < n
        off = sp.csr_matrix((-self.weights[inner], (self.rows[inner], self.cols[inner])), shape=(n, n))
        return (off + sp.diags(self.degree)).tocsc()

    @cached_property
    def boundary_coupling(self) -> sp.csr_matrix:
        """Weights from interior rows to boundary columns."""
        n = self.n_interior
        outer = self.cols >= n
        return sp.csr_matrix((self.weights[outer], (self.rows[outer], self.cols[outer] - n)),
                             shape=(n, len(self.boundary)))

    def sub_ball(self, radius: float) -> "FiniteRegion":
        """Concentric ball of smaller radius, cut from this region without oracle calls."""
        if radius > self.radius:
            raise GraphError("sub-ball must not exceed the parent radius")
        key = self.norm_sq if self.metric == "euclidean" else self.shell.astype(float)
        lim = radius * radius if self.metric == "euclidean" else radius
        inside = np.flatnonzero(key[: self.n_interior] < lim)
        keep = np.isin(self.rows, inside)
        rows, cols, w = self.rows[keep], self.cols[keep], self.weights[keep]
        bnd = np.unique(cols[~np.isin(cols, inside)])
        order = np.concatenate([inside, bnd])
        remap = np.full(self.n_closure, -1)
        remap[order] = np.arange(len(order))
        closure = self.closure
        return FiniteRegion(
            graph=self.graph,
            interior=[closure[i] for i in inside],
            boundary=[closure[i] for i in bnd],
            shell=self.shell[order], measure=self.measure[order],
            rows=remap[rows], cols=remap[cols], weights=w,
            seed=self.seed, radius=radius, metric=self.metric,
            coords=None if self.coords is None else self.coords[order])

    def descriptor(self) -> dict:
        return {"graph": self.graph.descriptor(), "seed": [list(s) for s in self.seed],
                "radius": self.radius, "metric": self.metric,
                "n_interior": self.n_interior, "n_boundary": len(self.boundary)}


def _as_seed(g: WeightedGraph, seed) -> tuple:
    if seed is None:
        if g.root is None:
            raise ValueError("graph has no root; pass a seed")
        return (g.root,)
    if isinstance(seed, (int, np.integer)):
        return (g.vertex(seed),)
    if isinstance(seed, tuple) and all(isinstance(c, (int, np.integer)) for c in seed):
        return (g.vertex(seed),)
    out = tuple(sorted({g.vertex(s) for s in seed}))
    if not out:
        raise ValueError("seed set is empty")
    return out


def materialize_ball(g: WeightedGraph, seed=None, radius: float = 1, metric: str = "combinatorial",
                     budget: int | None = None) -> FiniteRegion:
    """Ball ``{x : d(x, seed) < radius}`` together with its vertex boundary.

    ``metric`` is ``"combinatorial"`` (graph distance) or ``"euclidean"``
    (lattices only, single seed).
    """
    budget = max_vertices() if budget is None else budget
    seeds = _as_seed(g, seed)
    if radius <= 0:
        raise ValueError("radius must be positive")
    if metric not in ("combinatorial", "euclidean"):
        raise ValueError(f"unknown metric {metric!r}")
    if isinstance(g, Lattice) and len(seeds) == 1:
        return _lattice_ball(g, seeds[0], radius, metric, budget)
    if metric == "euclidean":
        raise ValueError("Euclidean balls are only defined on lattices with a single seed")
    return _bfs_ball(g, seeds, radius, budget)


def _bfs_ball(g, seeds, radius, budget) -> FiniteRegion:
    dist = {s: 0 for s in seeds}
    queue = deque(seeds)
    edges = []
    while queue:
        x = queue.popleft()
        d = dist[x]
        if d >= radius:
            continue
        for y, w in g.neighbors(x):
            edges.append((x, y, w))
            if y not in dist:
                dist[y] = d + 1
                if len(dist) > budget:
                    raise BudgetExceeded(f"ball needs more than {budget} vertices")
                queue.append(y)
    interior = sorted(v for v, d in dist.items() if d < radius)
    boundary = sorted(v for v, d in dist.items() if d >= radius)
    closure = interior + boundary
    pos = {v: i for i, v in enumerate(closure)}
    rows = np.array([pos[x] for x, _, _ in edges], dtype=np.int64)
    cols = np.array([pos[y] for _, y, _ in edges], dtype=np.int64)
    w = np.array([e[2] for e in edges], dtype=float)
    return FiniteRegion(graph=g, interior=interior, boundary=boundary,
                        shell=np.array([dist[v] for v in closure], dtype=np.int64),
                        measure=np.array([g.measure(v) for v in closure], dtype=float),
                        rows=rows, cols=cols, weights=w,
                        seed=tuple(seeds), radius=radius, metric="combinatorial")


def _lattice_ball(g: Lattice, x0, radius, metric, budget) -> FiniteRegion:
    n = g.n
    c = int(math.ceil(radius)) + 1
    axis = np.arange(-c, c + 1)
    grid = np.stack(np.meshgrid(*[axis] * n, indexing="ij"), axis=-1).reshape(-1, n)
    if metric == "euclidean":
        inside = np.einsum("ij,ij->i", grid, grid) < radius * radius
    else:
        inside = np.abs(grid).sum(axis=1) < radius
    inner = grid[inside]
    steps = np.concatenate([s * np.eye(n, dtype=np.int64)[k][None] for k in range(n) for s in (-1, 1)])
    nb = (inner[:, None, :] + steps[None, :, :]).reshape(-1, n)
    side = 2 * c + 1
    flat = lambda a: np.ravel_multi_index(tuple((a + c).T), (side,) * n)
    mask = np.zeros(side ** n, dtype=bool)
    mask[flat(inner)] = True
    outer = nb[~mask[flat(nb)]]
    outer = np.unique(outer, axis=0) if len(outer) else outer.reshape(0, n)
    total = len(inner) + len(outer)
    if total > budget:
        raise BudgetExceeded(f"ball needs {total} vertices, budget is {budget}")
    coords = np.concatenate([inner, outer]) + np.asarray(x0)
    lookup = np.full(side ** n, -1, dtype=np.int64)
    lookup[flat(coords - np.asarray(x0))] = np.arange(total)
    rows = np.repeat(np.arange(len(inner)), 2 * n)
    cols = lookup[flat(nb)]
    verts = [tuple(v) for v in coords.tolist()]
    return FiniteRegion(graph=g, interior=verts[: len(inner)], boundary=verts[len(inner):],
                        shell=np.abs(coords - np.asarray(x0)).sum(axis=1),
                        measure=np.full(total, 2.0 * n),
                        rows=rows, cols=cols, weights=np.ones(len(rows)),
                        seed=(tuple(x0),), radius=radius, metric=metric, coords=coords)


def combinatorial_distance(g: WeightedGraph, x, seed=None, budget: int | None = None,
                           fast: bool = True) -> int | None:
    """Graph distance from ``x`` to the seed set; ``None`` if the search budget runs out."""
    seeds = _as_seed(g, seed)
    x = g.vertex(x)
    if fast and len(seeds) == 1:
        if isinstance(g, Lattice):
            return sum(abs(a - b) for a, b in zip(x, seeds[0]))
        if seeds[0] == g.root and g.shell_of(x) is not None:
            return g.shell_of(x)
    budget = max_vertices() if budget is None else budget
    dist = {s: 0 for s in seeds}
    queue = deque(seeds)
    while queue:
        v = queue.popleft()
        if v == x:
            return dist[v]
        for y, _ in g.neighbors(v):
            if y not in dist:
                if len(dist) >= budget:
                    return None
                dist[y] = dist[v] + 1
                queue.append(y)
    return None


def outer_inner_degree(g: WeightedGraph, x, seed=None) -> tuple[float, float]:
    """Edge mass from ``x`` to the next and to the previous shell, divided by ``mu(x)``."""
    x = g.vertex(x)
    r = combinatorial_distance(g, x, seed)
    up, down = [], []
    for y, w in g.neighbors(x):
        d = combinatorial_distance(g, y, seed)
        if d == r + 1:
            up.append(w)
        elif d == r - 1:
            down.append(w)
    mu = g.measure(x)
    return math.fsum(up) / mu, math.fsum(down) / mu


# --------------------------------------------------------------------------
# radial profiles


@dataclass(frozen=True)
class RadialProfile:
    """Per-shell outer/inner degrees, shell measure and shell cardinality."""

    d_plus: np.ndarray
    d_minus: np.ndarray
    shell_measure: np.ndarray
    shell_card: tuple

    @property
    def max_shell(self) -> int:
        return len(self.d_plus) - 1

    def edge_mass(self) -> np.ndarray:
        """Total weight between shell ``m`` and ``m + 1``, for ``m < max_shell``."""
        return self.d_plus[:-1] * self.shell_measure[:-1]

    def detailed_balance_residual(self) -> np.ndarray:
        out = self.d_plus[:-1] * self.shell_measure[:-1]
        back = self.d_minus[1:] * self.shell_measure[1:]
        return np.abs(out - back) / np.maximum(np.abs(out), np.abs(back))

    def degree(self) -> np.ndarray:
        """Weighted degree per shell, assuming no edges inside a shell."""
        return self.d_plus + self.d_minus

    def truncated(self, max_shell: int) -> "RadialProfile":
        k = max_shell + 1
        return RadialProfile(self.d_plus[:k], self.d_minus[:k], self.shell_measure[:k],
                             self.shell_card[:k])

    def quotient(self) -> RadialQuotient:
        return RadialQuotient(self)


def _sample_ordinals(size: int, limit: int) -> list[int]:
    if size <= limit:
        return list(range(size))
    rng = np.random.default_rng(size % (2 ** 32))
    extra = rng.integers(0, size, 60).tolist() if size < 2 ** 63 else [
        int(size * f) for f in rng.random(60)]
    return sorted({0, size - 1, size // 2, *[min(int(k), size - 1) for k in extra]})


def _uniform(vals, m, what):
    vals = np.asarray(vals, dtype=float)
    ref = vals[0]
    if np.any(np.abs(vals - ref) > PROFILE_RTOL * max(abs(ref), 1e-300)):
        raise NotWeaklySymmetric(m, f"{what} ranges over [{float(vals.min())!r}, {float(vals.max())!r}]")
    return ref


def extract_radial_profile(g: WeightedGraph, seed=None, max_shell: int = 10,
                           exhaustive_limit: int = EXHAUSTIVE_SHELL_LIMIT) -> RadialProfile:
    """Read off outer/inner degrees shell by shell and check they are constant.

    Shell families rooted at their root enumerate shells directly; shells
    with more than ``exhaustive_limit`` vertices are checked on a
    deterministic sample.  Other graphs go through a materialised ball.
    """
    seeds = _as_seed(g, seed)
    dp, dm, sm, card = [], [], [], []
    if isinstance(g, _ShellFamily) and seeds == (g.root,):
        for m in range(max_shell + 1):
            size = g.shell_size(m)
            ks = _sample_ordinals(size, exhaustive_limit)
            plus, minus, mus = [], [], []
            for k in ks:
                x = (m, k)
                mu = g.measure(x)
                up = math.fsum(w for y, w in g.neighbors(x) if y[0] == m + 1)
                down = math.fsum(w for y, w in g.neighbors(x) if y[0] == m - 1)
                plus.append(up / mu)
                minus.append(down / mu)
                mus.append(mu)
            dp.append(_uniform(plus, m, "outer degree"))
            dm.append(_uniform(minus, m, "inner degree"))
            if size <= exhaustive_limit:
                sm.append(math.fsum(mus))
            else:
                sm.append(size * _uniform(mus, m, "measure"))
            card.append(size)
    else:
        region = materialize_ball(g, seeds, max_shell + 1)
        shell = region.shell[: region.n_interior]
        mu = region.interior_measure
        for m in range(max_shell + 1):
            sel = shell == m
            if not sel.any():
                raise GraphError(f"shell {m} is empty")
            dp.append(_uniform(region.outer_degree[sel], m, "outer degree"))
            dm.append(_uniform(region.inner_degree[sel], m, "inner degree"))
            sm.append(math.fsum(mu[sel]))
            card.append(int(sel.sum()))
    return RadialProfile(np.array(dp), np.array(dm), np.array(sm), tuple(card))


def radial_region(profile: RadialProfile, radius: int) -> FiniteRegion:
    """Shells ``0..radius-1`` as interior, shell ``radius`` as the boundary."""
    if radius > profile.max_shell:
        raise TruncatedGraph(f"profile has shells up to {profile.max_shell}, need {radius}")
    return materialize_ball(profile.quotient(), None, radius)


def symmetry_audit(g: WeightedGraph, vertices: Sequence, rtol: float = 1e-12) -> list[tuple]:
    """Edges ``(x, y)`` among the given vertices' neighbourhoods with ``w(x,y) != w(y,x)``."""
    bad = []
    for x in vertices:
        for y, w in g.neighbors(x):
            back = [v for z, v in g.neighbors(y) if z == tuple(x)]
            if len(back) != 1 or abs(back[0] - w) > rtol * abs(w):
                bad.append((tuple(x), y, w, back[0] if back else None))
    return bad
