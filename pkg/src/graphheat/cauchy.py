"""Heat equation ``rho du/dt = Lap u + f`` on a finite region with Dirichlet data.

Two independent routes: an eigenfunction expansion with closed-form time
integrals, and backward Euler on a sparse factorisation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from .graph_core import FiniteRegion
from .io_utils import atomic_writer, format_vertex
from .spectral import SpectralBasis, dirichlet_spectrum

QUAD_RTOL = 1e-10
QUAD_MAX_DEPTH = 40


class QuadratureError(Exception):
    pass


@dataclass(frozen=True)
class TimeData:
    """Vertex data in time: a sum of ``a * exp(c t)`` terms plus an optional callable.

    ``terms`` holds ``(amplitude, rate)`` pairs; ``rule(t)`` returns an array.
    """

    size: int
    terms: tuple = ()
    rule: Callable[[float], np.ndarray] | None = None

    @classmethod
    def zeros(cls, size: int) -> "TimeData":
        return cls(size)

    @classmethod
    def constant(cls, values, size: int | None = None) -> "TimeData":
        values = np.asarray(values, dtype=float)
        if values.ndim == 0:
            values = np.full(size, float(values))
        return cls(len(values), ((values, 0.0),))

    @classmethod
    def exponential(cls, values, rate: float) -> "TimeData":
        values = np.asarray(values, dtype=float)
        return cls(len(values), ((values, float(rate)),))

    @classmethod
    def generic(cls, rule: Callable[[float], np.ndarray], size: int) -> "TimeData":
        return cls(size, (), rule)

    @property
    def kind(self) -> str:
        if self.rule is not None:
            return "generic"
        if all(c == 0.0 for _, c in self.terms):
            return "constant"
        return "exponential"

    def at(self, t: float) -> np.ndarray:
        out = np.zeros(self.size)
        for a, c in self.terms:
            out += a * math.exp(c * t)
        if self.rule is not None:
            out += np.asarray(self.rule(t), dtype=float)
        return out

    def derivative(self, t: float) -> np.ndarray:
        out = np.zeros(self.size)
        for a, c in self.terms:
            out += c * a * math.exp(c * t)
        if self.rule is not None:
            h = 1e-6 * max(1.0, abs(t))
            out += (np.asarray(self.rule(t + h)) - np.asarray(self.rule(t - h))) / (2 * h)
        return out

    def sup_norm(self, t1: float, t2: float) -> float:
        """Sup norm over the end points (exact for monotone terms, a sample otherwise)."""
        ts = [t1, t2] if self.rule is None else np.linspace(t1, t2, 9)
        return max(float(np.max(np.abs(self.at(t)), initial=0.0)) for t in ts)

    def mapped(self, op: Callable[[np.ndarray], np.ndarray], size: int) -> "TimeData":
        rule = None if self.rule is None else (lambda t, r=self.rule: op(np.asarray(r(t))))
        return TimeData(size, tuple((op(a), c) for a, c in self.terms), rule)

    def __add__(self, other: "TimeData") -> "TimeData":
        if other.size != self.size:
            raise ValueError("size mismatch")
        if self.rule is None or other.rule is None:
            rule = self.rule or other.rule
        else:
            rule = lambda t, a=self.rule, b=other.rule: np.asarray(a(t)) + np.asarray(b(t))
        return TimeData(self.size, self.terms + other.terms, rule)


@dataclass(frozen=True)
class HeatProblem:
    """Data for ``rho u_t = Lap u + f`` on ``region`` over ``[t1, t2]``.

    ``initial`` and ``rho`` live on the interior, ``source`` on the interior
    and ``boundary`` on the boundary layer.
    """

    region: FiniteRegion
    rho: np.ndarray
    initial: np.ndarray
    source: TimeData
    boundary: TimeData
    t1: float = 0.0
    t2: float = 1.0

    def __post_init__(self):
        n, nb = self.region.n_interior, len(self.region.boundary)
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != (n,) or np.any(~(rho > 0)) or np.any(~np.isfinite(rho)):
            raise ValueError("rho must be positive and finite on the interior")
        if np.asarray(self.initial).shape != (n,):
            raise ValueError("initial data must have one value per interior vertex")
        if self.source.size != n or self.boundary.size != nb:
            raise ValueError("source/boundary sizes do not match the region")
        if not self.t1 < self.t2:
            raise ValueError("need t1 < t2")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "initial", np.asarray(self.initial, dtype=float))

    @classmethod
    def simple(cls, region, rho, initial, source=0.0, boundary=0.0, t1=0.0, t2=1.0):
        """Problem with time-constant source and boundary values."""
        n, nb = region.n_interior, len(region.boundary)
        return cls(region, np.broadcast_to(np.asarray(rho, float), (n,)).copy(),
                   np.broadcast_to(np.asarray(initial, float), (n,)).copy(),
                   TimeData.constant(source, n), TimeData.constant(boundary, nb), t1, t2)

    def data_scale(self) -> float:
        return max(float(np.max(np.abs(self.initial), initial=0.0)),
                   self.boundary.sup_norm(self.t1, self.t2),
                   self.source.sup_norm(self.t1, self.t2) * (self.t2 - self.t1), 1e-300)


@dataclass
class HeatSolution:
    """Closure values on a time grid.

    ``values[k]`` is the closure vector at ``times[k]``.  For the spectral
    route ``derivative[k]`` is the exact time derivative on the interior and
    ``basis``/``coefficients`` hold the modal representation.
    """

    region: FiniteRegion
    times: np.ndarray
    values: np.ndarray
    representation: str
    derivative: np.ndarray | None = None
    basis: SpectralBasis | None = None
    coefficients: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def interior(self) -> np.ndarray:
        return self.values[:, : self.region.n_interior]

    def value(self, x, k: int) -> float:
        return float(self.values[k, self.region.index[tuple(x)]])

    def write_csv(self, path) -> None:
        with atomic_writer(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["vertex", "t", "value"])
            names = [format_vertex(v) for v in self.region.closure]
            for k, t in enumerate(self.times):
                for name, v in zip(names, self.values[k]):
                    w.writerow([name, repr(float(t)), repr(float(v))])


def fourier_coefficients(basis: SpectralBasis, f) -> np.ndarray:
    """Coefficients ``<f, phi_j>`` in the weighted inner product of the basis."""
    f = np.asarray(f, dtype=float)
    if f.shape != (basis.eigenvectors.shape[0],):
        raise ValueError(f"function has shape {f.shape}, basis lives on {basis.eigenvectors.shape[0]} vertices")
    return basis.coefficients(f)


def reduce_boundary(problem: HeatProblem) -> HeatProblem:
    """Move boundary data into the source: ``f + (1/mu) sum_{y in boundary} w g(y)``."""
    region = problem.region
    coupling = region.boundary_coupling
    mu = region.interior_measure
    n = region.n_interior
    extra = problem.boundary.mapped(lambda g: (coupling @ g) / mu, n)
    return replace(problem, source=problem.source + extra,
                   boundary=TimeData.zeros(len(region.boundary)))


def time_grid(t1: float, t2: float, dt: float) -> np.ndarray:
    steps = int(round((t2 - t1) / dt))
    if steps < 1 or abs(steps * dt - (t2 - t1)) > 1e-9 * max(1.0, abs(t2 - t1)):
        raise ValueError(f"dt={dt} does not divide [{t1}, {t2}]")
    return t1 + dt * np.arange(steps + 1)


def _exp_convolution(lam: np.ndarray, c: float, tau: float) -> np.ndarray:
    """``int_0^tau exp(-lam (tau - s)) exp(c s) ds`` for each ``lam``."""
    z = (lam + c) * tau
    out = np.empty_like(lam)
    small = np.abs(z) < 1e-8
    out[small] = tau * math.exp(c * tau) * (1.0 - 0.5 * z[small])
    zz = z[~small]
    # exp(c tau) * (1 - exp(-z)) / (lam + c)
    out[~small] = math.exp(c * tau) * (-np.expm1(-zz)) / (lam[~small] + c)
    return out


def adaptive_simpson(fun: Callable[[float], np.ndarray], a: float, b: float,
                     rtol: float = QUAD_RTOL, atol: float = 1e-300,
                     max_depth: int = QUAD_MAX_DEPTH) -> np.ndarray:
    """Vector-valued adaptive Simpson quadrature with a max-norm error test."""
    fa, fb, fm = fun(a), fun(b), fun(0.5 * (a + b))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = max(rtol * float(np.max(np.abs(whole), initial=0.0)), atol)
    total = np.zeros_like(whole)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a0, b0, f0, f1, f2, est, eps, depth = stack.pop()
        m = 0.5 * (a0 + b0)
        fl, fr = fun(0.5 * (a0 + m)), fun(0.5 * (m + b0))
        left = (m - a0) / 6.0 * (f0 + 4.0 * fl + f1)
        right = (b0 - m) / 6.0 * (f1 + 4.0 * fr + f2)
        err = float(np.max(np.abs(left + right - est), initial=0.0))
        if err <= 15.0 * eps:
            total += left + right + (left + right - est) / 15.0
        elif depth >= max_depth:
            raise QuadratureError(f"no convergence on [{a0}, {b0}] (error {err:.3e})")
        else:
            stack.append((a0, m, f0, fl, f1, left, 0.5 * eps, depth + 1))
            stack.append((m, b0, f1, fr, f2, right, 0.5 * eps, depth + 1))
    return total


def solve_spectral(problem: HeatProblem, times=None, dt: float | None = None,
                   basis: SpectralBasis | None = None, method: str = "lapack") -> HeatSolution:
    """Modal solution evaluated on ``times`` (or a uniform grid of step ``dt``)."""
    if times is None:
        times = time_grid(problem.t1, problem.t2, dt if dt is not None else (problem.t2 - problem.t1) / 100)
    times = np.asarray(times, dtype=float)
    region = problem.region
    red = reduce_boundary(problem)
    if basis is None:
        basis = dirichlet_spectrum(region, problem.rho, method=method)
    lam = basis.eigenvalues
    mu = region.interior_measure
    c0 = basis.coefficients(problem.initial)
    forcing = [(basis.eigenvectors.T @ (mu * a), c) for a, c in red.source.terms]
    rule = red.source.rule
    modal_rule = None if rule is None else (lambda s: basis.eigenvectors.T @ (mu * np.asarray(rule(s))))

    coeffs = np.empty((len(times), basis.size))
    generic = np.zeros(basis.size)
    prev = problem.t1
    for k, t in enumerate(times):
        tau = t - problem.t1
        u = np.exp(-lam * tau) * c0
        for fhat, c in forcing:
            u = u + fhat * math.exp(c * problem.t1) * _exp_convolution(lam, c, tau)
        if modal_rule is not None and t > prev:
            step = adaptive_simpson(lambda s, t=t: np.exp(-lam * (t - s)) * modal_rule(s), prev, t)
            generic = np.exp(-lam * (t - prev)) * generic + step
            prev = t
        coeffs[k] = u + generic

    n = region.n_interior
    values = np.empty((len(times), region.n_closure))
    values[:, :n] = basis.reconstruct(coeffs)
    deriv = np.empty((len(times), n))
    for k, t in enumerate(times):
        fhat = basis.eigenvectors.T @ (mu * red.source.at(t))
        deriv[k] = basis.reconstruct(-lam * coeffs[k] + fhat)
        values[k, n:] = problem.boundary.at(t)
    values[times == problem.t1, :n] = problem.initial
    return HeatSolution(region, times, values, "spectral", deriv, basis, coeffs)


def solve_backward_euler(problem: HeatProblem, dt: float) -> HeatSolution:
    """Backward Euler with one sparse LU factorisation.

    The system matrix ``diag(rho mu / dt) + K`` is an M-matrix, so the scheme
    keeps the discrete maximum principle.
    """
    region = problem.region
    times = time_grid(problem.t1, problem.t2, dt)
    n = region.n_interior
    mass = problem.rho * region.interior_measure / dt
    lu = splu((diags(mass) + region.stiffness).tocsc())
    coupling = region.boundary_coupling
    mu = region.interior_measure
    values = np.empty((len(times), region.n_closure))
    values[0, :n] = problem.initial
    values[0, n:] = problem.boundary.at(times[0])
    u = problem.initial.copy()
    for k in range(1, len(times)):
        t = times[k]
        g = problem.boundary.at(t)
        rhs = mass * u + mu * problem.source.at(t) + coupling @ g
        u = lu.solve(rhs)
        values[k, :n] = u
        values[k, n:] = g
    return HeatSolution(region, times, values, "grid", meta={"dt": dt})


def residual_field(solution: HeatSolution, problem: HeatProblem) -> np.ndarray:
    """``rho u_t - Lap u - f`` on the interior at every stored time.

    Spectral solutions use their exact derivative.  Grid solutions use
    central differences, so the first and last rows are ``nan``.
    """
    region = solution.region
    lap = region.laplacian(solution.values)
    src = np.array([problem.source.at(t) for t in solution.times])
    if solution.derivative is not None:
        dudt = solution.derivative
    else:
        u = solution.interior
        dudt = np.full_like(u, np.nan)
        t = solution.times
        dudt[1:-1] = (u[2:] - u[:-2]) / (t[2:] - t[:-2])[:, None]
    return problem.rho * dudt - lap - src


def residual_check(solution: HeatSolution, problem: HeatProblem, samples=None) -> float:
    """Max absolute residual over ``(vertex, time_index)`` samples, or everywhere."""
    res = residual_field(solution, problem)
    if samples is None:
        return float(np.nanmax(np.abs(res)))
    idx = solution.region.index
    vals = [abs(res[k, idx[tuple(x)]]) for x, k in samples]
    if any(np.isnan(vals)):
        raise ValueError("residual is undefined at an end node of a grid solution")
    return float(max(vals))
