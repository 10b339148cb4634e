"""Monotone exhaustion by balls, decay envelopes, and the two-solution exhibit.

A run solves the homogeneous heat equation on an increasing list of balls
``B_j``.  In ``shift`` mode the data are ``u0 - gamma`` with zero boundary
values, giving a nondecreasing sequence ``0 <= v_j <= M``.  In ``boundary``
mode the data are ``u0`` with constant boundary value ``c >= max u0``,
giving a nonincreasing sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .barriers import (DensitySpec, EllipticCertificate, NonSummableError, RadialH,
                       certify_elliptic, construct_ball_h, construct_radial_h)
from .cauchy import HeatProblem, solve_backward_euler, solve_spectral, time_grid
from .graph_core import (BudgetExceeded, FiniteRegion, Lattice, SphericalTree, WeightedGraph,
                         extract_radial_profile, materialize_ball, radial_region)
from .io_utils import checked, format_vertex
from .spectral import SpectralSizeError

INVARIANT_TOL = 1e-9


class ExhaustionError(Exception):
    """A run violated a hard invariant or could not be carried out."""


class PreconditionRefused(Exception):
    """Inputs are outside the regime an experiment is meant for."""


@dataclass(frozen=True)
class InitialDatum:
    """``u0 = gamma + excess`` with ``excess >= 0`` vanishing off ``B_rhat``.

    ``radial`` marks data that depend only on the distance from the seed;
    ``excess`` is then called on shell representatives ``(m, 0)``.
    """

    gamma: float
    rhat: float
    excess: Callable
    radial: bool = False
    label: str = "custom"

    @classmethod
    def indicator(cls, gamma: float, vertices, height: float = 1.0, rhat: float = 1.0):
        verts = {tuple(v) for v in vertices}
        return cls(float(gamma), float(rhat), lambda x: height if tuple(x) in verts else 0.0,
                   False, f"indicator{sorted(verts)}*{height}")

    @classmethod
    def shells(cls, gamma: float, heights, rhat: float | None = None):
        """Radial bump with value ``gamma + heights[m]`` on shell ``m``."""
        hs = tuple(float(h) for h in heights)
        return cls(float(gamma), float(len(hs) if rhat is None else rhat),
                   lambda x: hs[x[0]] if x[0] < len(hs) else 0.0, True, f"shells{list(hs)}")

    @classmethod
    def constant(cls, gamma: float):
        return cls(float(gamma), 1.0, lambda x: 0.0, True, "constant")


def _distance(region: FiniteRegion) -> np.ndarray:
    if region.metric == "euclidean":
        return np.sqrt(region.norm_sq)
    return region.shell.astype(float)


def validate_initial(u0: InitialDatum, region: FiniteRegion) -> np.ndarray:
    """Excess values on the closure; exact checks that it is nonnegative and vanishes off ``B_rhat``."""
    if not u0.rhat > 0:
        raise PreconditionRefused("rhat must be positive")
    ex = np.array([u0.excess(x) for x in region.closure], dtype=float)
    if np.any(~np.isfinite(ex)) or np.any(ex < 0):
        i = int(np.flatnonzero(~(ex >= 0))[0])
        raise PreconditionRefused(f"u0 < gamma at {format_vertex(region.closure[i])}")
    outside = _distance(region) >= u0.rhat
    if np.any(ex[outside] != 0.0):
        i = int(np.flatnonzero(outside & (ex != 0.0))[0])
        raise PreconditionRefused(
            f"u0 differs from gamma at {format_vertex(region.closure[i])}, outside the declared radius {u0.rhat}")
    return ex


def _check_radial_datum(g: WeightedGraph, u0: InitialDatum):
    ball = materialize_ball(g, None, u0.rhat)
    ex = np.array([u0.excess(x) for x in ball.closure])
    for m in np.unique(ball.shell):
        vals = ex[ball.shell == m]
        if np.any(vals != vals[0]):
            raise PreconditionRefused(f"u0 is not radial on shell {m}")


@dataclass
class ExhaustionRun:
    graph: WeightedGraph
    density: DensitySpec
    u0: InitialDatum
    mode: str
    boundary_value: float
    j_list: list
    times: np.ndarray
    solver: str
    regions: list
    rho: list
    solutions: list
    excess: list
    gaps: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def gamma(self) -> float:
        return self.u0.gamma

    @property
    def M(self) -> float:
        return float(np.max(self.excess[-1], initial=0.0))

    @property
    def cauchy_gap(self) -> float:
        return self.gaps[-1] if self.gaps else math.nan

    def solution_values(self, i: int = -1) -> np.ndarray:
        """Values of the actual solution: ``gamma + v_j`` in shift mode, ``w_j`` otherwise."""
        v = self.solutions[i].values
        return self.gamma + v if self.mode == "shift" else v

    def time_index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9:
            raise ValueError(f"time {t} is not a stored node")
        return k

    def binned_profile(self, t: float, i: int = -1, reduce: str = "max") -> tuple[np.ndarray, np.ndarray]:
        """``(bins, values)`` of the solution at time ``t`` over interior vertices.

        Bins are shells for combinatorial balls and ``floor(|x|)`` for
        Euclidean ones.
        """
        region = self.regions[i]
        n = region.n_interior
        k = self.time_index(t)
        vals = self.solution_values(i)[k, :n]
        bins = np.floor(_distance(region)[:n] + 1e-12).astype(int)
        keys = np.unique(bins)
        op = {"max": np.max, "min": np.min, "mean": np.mean}[reduce]
        return keys, np.array([op(vals[bins == b]) for b in keys])

    def summary(self) -> dict:
        return {"mode": self.mode, "gamma": self.gamma, "boundary_value": self.boundary_value,
                "j_list": list(self.j_list), "solver": self.solver, "M": self.M,
                "t_final": float(self.times[-1]), "steps": len(self.times) - 1,
                "cauchy_gap": checked(self.cauchy_gap, INVARIANT_TOL), "gaps": list(self.gaps),
                "u0": self.u0.label, "rhat": self.u0.rhat, **self.meta}


def _build_regions(g, u0, j_list, solver, metric):
    if solver == "radial":
        if metric != "combinatorial":
            raise ExhaustionError("the radial path uses combinatorial balls")
        if not u0.radial:
            _check_radial_datum(g, u0)
        profile = extract_radial_profile(g, None, max(j_list))
        return [radial_region(profile, j) for j in j_list]
    try:
        return [materialize_ball(g, None, j, metric) for j in j_list]
    except BudgetExceeded as exc:
        raise ExhaustionError(f"{exc}; a weakly symmetric graph can use solver='radial'") from exc


def _solve(region, rho, initial, boundary, times, solver, dt):
    problem = HeatProblem.simple(region, rho, initial, 0.0, boundary, float(times[0]), float(times[-1]))
    if solver == "euler":
        return solve_backward_euler(problem, dt)
    try:
        return solve_spectral(problem, times=times)
    except SpectralSizeError as exc:
        raise ExhaustionError(f"{exc}; use solver='euler' or 'radial'") from exc


def _run(g, rho, u0, j_list, T, dt, solver, metric, mode, c) -> ExhaustionRun:
    j_list = [int(j) if float(j).is_integer() else float(j) for j in j_list]
    if not j_list or any(b <= a for a, b in zip(j_list, j_list[1:])):
        raise ExhaustionError("j_list must be nonempty and strictly increasing")
    if j_list[0] < u0.rhat:
        raise ExhaustionError("the smallest ball must contain B_rhat")
    if solver not in ("spectral", "euler", "radial"):
        raise ValueError(f"unknown solver {solver!r}")
    times = time_grid(0.0, T, dt)
    regions = _build_regions(g, u0, j_list, solver, metric)
    excess = [validate_initial(u0, r) for r in regions]
    top = u0.gamma + float(np.max(excess[-1]))
    if mode == "boundary" and c < top:
        raise PreconditionRefused(f"boundary value {c} is below max u0 = {top}")
    sols, rhos = [], []
    for region, ex in zip(regions, excess):
        rho_i = rho.on_region(region)
        n = region.n_interior
        if mode == "shift":
            sol = _solve(region, rho_i, ex[:n], 0.0, times, solver, dt)
        else:
            sol = _solve(region, rho_i, u0.gamma + ex[:n], c, times, solver, dt)
        sols.append(sol)
        rhos.append(rho_i)
    run = ExhaustionRun(g, rho, u0, mode, c, j_list, times, solver, regions, rhos, sols, excess,
                        meta={"dt": dt, "metric": metric})
    _enforce_invariants(run)
    return run


def _enforce_invariants(run: ExhaustionRun):
    M = run.M
    lo, hi = (0.0, M) if run.mode == "shift" else (run.gamma + float(np.min(run.excess[-1])), run.boundary_value)
    tol = INVARIANT_TOL * max(1.0, abs(hi), abs(lo))
    for j, sol in zip(run.j_list, run.solutions):
        v = sol.values
        if np.min(v) < lo - tol or np.max(v) > hi + tol:
            raise ExhaustionError(f"ball {j}: values leave [{lo}, {hi}] "
                                  f"(min {np.min(v):.3e}, max {np.max(v):.3e})")
    probe = run.regions[0]
    sign = 1.0 if run.mode == "shift" else -1.0
    run.gaps = []
    for i in range(len(run.regions) - 1):
        small, big = run.regions[i], run.regions[i + 1]
        idx = np.array([big.index[v] for v in small.closure])
        diff = sign * (run.solutions[i + 1].values[:, idx] - run.solutions[i].values)
        if np.min(diff) < -tol:
            k, p = np.unravel_index(int(np.argmin(diff)), diff.shape)
            raise ExhaustionError(
                f"monotonicity in j fails between balls {run.j_list[i]} and {run.j_list[i + 1]} at "
                f"{format_vertex(small.closure[p])}, t={run.times[k]} by {-diff[k, p]:.3e}")
        pidx = np.array([big.index[v] for v in probe.interior])
        sidx = np.array([small.index[v] for v in probe.interior])
        gap = np.abs(run.solutions[i + 1].values[:, pidx] - run.solutions[i].values[:, sidx])
        run.gaps.append(float(np.max(gap)))


def run_exhaustion(g: WeightedGraph, rho: DensitySpec, u0: InitialDatum, j_list, T: float,
                   dt: float, solver: str = "radial", metric: str = "combinatorial") -> ExhaustionRun:
    """Solve ``rho v_t = Lap v`` on ``B_j`` with ``v = u0 - gamma`` at ``t = 0`` and ``v = 0`` outside.

    The largest-ball solution plus ``gamma`` approximates the limit
    solution from below; consecutive differences on ``B_{j_min}`` are
    reported as Cauchy gaps.
    """
    return _run(g, rho, u0, j_list, T, dt, solver, metric, "shift", 0.0)


def run_exhaustion_with_boundary(g: WeightedGraph, rho: DensitySpec, u0: InitialDatum, c: float,
                                 j_list, T: float, dt: float, solver: str = "radial",
                                 metric: str = "combinatorial") -> ExhaustionRun:
    """Companion exhaustion with data ``u0`` and constant boundary value ``c >= max u0``."""
    return _run(g, rho, u0, j_list, T, dt, solver, metric, "boundary", float(c))


# --------------------------------------------------------------------------
# envelope


@dataclass
class EnvelopeReport:
    t0: float
    eps: float
    kappa: float
    C: float
    min_h_core: float
    conditions: dict
    worst_margin: float
    location: tuple | None
    margins: list
    holds: bool
    tolerance: float = INVARIANT_TOL

    def to_dict(self) -> dict:
        loc = None if self.location is None else {
            "vertex": format_vertex(self.location[0]), "t": self.location[1], "j": self.location[2]}
        return {"t0": self.t0, "eps": self.eps, "kappa": self.kappa, "C": self.C,
                "min_h_core": self.min_h_core,
                "conditions": {k: checked(v, self.tolerance) for k, v in self.conditions.items()},
                "worst_margin": checked(self.worst_margin, self.tolerance), "location": loc,
                "margins": [{"bin": b, "margin": m} for b, m in self.margins], "holds": self.holds}


def certify_decay_envelope(run: ExhaustionRun, h, certificate: EllipticCertificate,
                           t0: float = 1.0, eps: float = 0.5, values=None) -> EnvelopeReport:
    """Check ``v_j <= C h + kappa (t - t0)^2`` on ``[t0 - eps, t0 + eps]`` for every ball.

    ``kappa = M/t0^2`` and ``C = max(M / min_{B_rhat} h, 2 kappa eps^2)``.
    ``values`` optionally replaces the stored solution arrays (one per ball)
    and exists for fault-injection tests.
    """
    if run.mode != "shift":
        raise ValueError("the envelope applies to shift-mode runs")
    if certificate is None or not certificate.passed or certificate.direction != "le_neg_rho":
        raise PreconditionRefused("h needs a passing certificate of Lap h <= -rho")
    if certificate.family != h.family or certificate.excluded_radius != run.u0.rhat:
        raise PreconditionRefused("certificate does not match h and the core radius")
    if not (t0 > 0 and 0 < eps < t0):
        raise ValueError("need 0 < eps < t0")
    M = run.M
    big = run.regions[-1]
    hv = h.on_region(big)
    core = _distance(big) < run.u0.rhat
    min_h = float(np.min(hv[core]))
    if not min_h > 0:
        raise PreconditionRefused("h is not positive on the core")
    kappa = M / t0 ** 2
    C = max(M / min_h, 2.0 * kappa * eps ** 2)
    scale = max(M, 1.0)
    conditions = {"initial_time": M - kappa * t0 ** 2, "core": M - C * min_h,
                  "time_curvature": 2.0 * kappa * eps ** 2 - C}
    cond_ok = all(v <= INVARIANT_TOL * scale for v in conditions.values())

    window = np.flatnonzero(np.abs(run.times - t0) <= eps + 1e-12)
    worst, where = math.inf, None
    per_bin: dict[int, float] = {}
    for i, region in enumerate(run.regions):
        v = run.solutions[i].values if values is None else values[i]
        hr = h.on_region(region)
        bound = C * hr[None, :] + kappa * (run.times[window, None] - t0) ** 2
        margin = bound - v[window]
        k, p = np.unravel_index(int(np.argmin(margin)), margin.shape)
        if margin[k, p] < worst:
            worst, where = float(margin[k, p]), (region.closure[p], float(run.times[window[k]]), run.j_list[i])
        if i == len(run.regions) - 1:
            bins = np.floor(_distance(region) + 1e-12).astype(int)
            col = margin.min(axis=0)
            for b in np.unique(bins):
                per_bin[int(b)] = float(col[bins == b].min())
    holds = cond_ok and worst >= -INVARIANT_TOL * scale
    return EnvelopeReport(t0, eps, kappa, C, min_h, conditions, worst,
                          where if worst < -INVARIANT_TOL * scale else None,
                          sorted(per_bin.items()), holds)


# --------------------------------------------------------------------------
# non-uniqueness


def _constant_branching(g: SphericalTree) -> int | None:
    b = {g.branching(m) for m in range(g.depth)}
    return b.pop() if len(b) == 1 else None


def check_nonuniqueness_preconditions(g: WeightedGraph, rho: DensitySpec) -> str:
    """Return ``"tree"`` or ``"lattice"``; raise :class:`PreconditionRefused` naming the violated bound."""
    p = rho.params
    if isinstance(g, SphericalTree):
        b0 = _constant_branching(g)
        if b0 is None or b0 < 2:
            raise PreconditionRefused("needs a tree with constant branching b0 >= 2")
        if rho.family != "power_decay" or p.get("metric") != "combinatorial":
            raise PreconditionRefused("needs rho <= c0 (1 + r)^(-alpha) with alpha > 1")
        if not p["alpha"] > 1:
            raise PreconditionRefused(f"rho <= c0 (1 + r)^(-alpha) needs alpha > 1, got {p['alpha']}")
        return "tree"
    if isinstance(g, Lattice):
        if g.n < 3:
            raise PreconditionRefused(f"needs lattice dimension n >= 3, got {g.n}")
        if rho.family != "power_decay" or p.get("metric") != "euclidean":
            raise PreconditionRefused("needs rho <= c0 (1 + |x|)^(-alpha) with alpha > 2")
        if not p["alpha"] > 2:
            raise PreconditionRefused(f"rho <= c0 (1 + |x|)^(-alpha) needs alpha > 2, got {p['alpha']}")
        return "lattice"
    raise PreconditionRefused(f"no non-uniqueness criterion for graph family {g.family!r}")


@dataclass
class ExhibitReport:
    setting: str
    run_a: ExhaustionRun
    run_b: ExhaustionRun
    h: object
    h_certificate: EllipticCertificate
    envelope: EnvelopeReport
    bins: np.ndarray
    profile_a: np.ndarray
    profile_b: np.ndarray
    envelope_profile: np.ndarray
    shared_initial: bool
    threshold: float
    passed: bool

    @property
    def separation(self) -> np.ndarray:
        return self.profile_b - self.profile_a

    def separation_at(self, radius: int) -> float:
        i = np.flatnonzero(self.bins == radius)
        if not i.size:
            raise KeyError(radius)
        return float(self.separation[i[0]])

    def to_dict(self) -> dict:
        sep = self.separation
        best = int(np.argmax(sep))
        return {"setting": self.setting, "shared_initial_datum": self.shared_initial,
                "threshold": self.threshold, "pass": self.passed,
                "max_separation": checked(float(sep[best]), 0.0), "at_radius": int(self.bins[best]),
                "largest_radius": int(self.bins[-1]),
                "separation_at_largest_radius": float(sep[-1]),
                "h": {"certificate": self.h_certificate.to_dict(),
                      **({"tail": self.h.tail, "decay": self.h.decay} if isinstance(self.h, RadialH)
                         else {"residual": checked(self.h.residual, 1e-10)})},
                "envelope": self.envelope.to_dict(),
                "solution_a": self.run_a.summary(), "solution_b": self.run_b.summary()}

    def profile_rows(self) -> list[list]:
        return [[int(b), float(a), float(bb), float(e), float(bb - a)]
                for b, a, bb, e in zip(self.bins, self.profile_a, self.profile_b, self.envelope_profile)]


def nonuniqueness_exhibit(g: WeightedGraph, rho: DensitySpec, u0: InitialDatum, c: float,
                          j_list, T: float = 1.5, dt: float = 0.01, t0: float = 1.0, eps: float = 0.5,
                          solver: str | None = None) -> ExhibitReport:
    """Two bounded solutions with the same initial datum and different values at infinity.

    Solution A comes from the shifted exhaustion and is certified to stay
    below ``gamma + C h``; solution B uses boundary value ``c``.  The exhibit
    passes if ``B - A >= (c - gamma)/2`` at some stored radius at time ``t0``.
    """
    setting = check_nonuniqueness_preconditions(g, rho)
    metric = "combinatorial" if setting == "tree" else "euclidean"
    solver = solver or ("radial" if setting == "tree" else "euler")
    if not c > u0.gamma:
        raise PreconditionRefused("c must exceed gamma")
    run_a = run_exhaustion(g, rho, u0, j_list, T, dt, solver, metric)
    run_b = run_exhaustion_with_boundary(g, rho, u0, c, j_list, T, dt, solver, metric)
    big = run_a.regions[-1]
    if setting == "tree":
        profile = extract_radial_profile(g, None, max(j_list))
        radial_rho = rho.on_region(radial_region(profile, max(j_list)))
        try:
            h = construct_radial_h(profile, radial_rho, max(j_list))
        except NonSummableError as exc:
            raise PreconditionRefused(str(exc)) from exc
    else:
        h = construct_ball_h(big, rho)
    cert = certify_elliptic(h, run_a.rho[-1], big, "le_neg_rho", exclude_radius=u0.rhat)
    if not cert.passed:
        raise ExhaustionError("h failed its certificate")
    env = certify_decay_envelope(run_a, h, cert, t0, eps)
    shared = bool(np.array_equal(run_a.solution_values()[0, : big.n_interior],
                                 run_b.solution_values()[0, : big.n_interior]))
    bins, pa = run_a.binned_profile(t0, reduce="max")
    _, pb = run_b.binned_profile(t0, reduce="min")
    hb = h.on_region(big)[: big.n_interior]
    dist = np.floor(_distance(big)[: big.n_interior] + 1e-12).astype(int)
    env_prof = np.array([u0.gamma + env.C * float(np.max(hb[dist == b])) for b in bins])
    threshold = (c - u0.gamma) / 2.0
    passed = shared and env.holds and bool(np.max(pb - pa) >= threshold)
    return ExhibitReport(setting, run_a, run_b, h, cert, env, bins, pa, pb, env_prof, shared,
                         threshold, passed)


# --------------------------------------------------------------------------
# time derivative


@dataclass
class DerivativeBoundReport:
    C: float
    max_excess_core: float
    max_ratio: float
    measured: float
    location: tuple | None
    holds: bool
    tolerance: float = INVARIANT_TOL

    def to_dict(self) -> dict:
        return {"C": self.C, "max_excess_core": self.max_excess_core,
                "max_degree_over_rho": self.max_ratio,
                "measured_max": checked(self.measured, self.tolerance),
                "location": None if self.location is None else
                {"vertex": format_vertex(self.location[0]), "t": self.location[1], "j": self.location[2]},
                "holds": self.holds}


def derivative_bound_constant(run: ExhaustionRun, s: int = 1) -> tuple[float, float, float]:
    """``(C, max_{B_rhat} excess, max_{B_{rhat+2s}} Deg/rho)`` for the largest ball."""
    region = run.regions[-1]
    n = region.n_interior
    dist = _distance(region)
    core = dist < run.u0.rhat
    m = float(np.max(run.excess[-1][core]))
    reach = dist[:n] < run.u0.rhat + 2 * s
    if run.u0.rhat + 2 * s > run.j_list[-1]:
        raise ExhaustionError("the largest ball does not contain B_{rhat + 2s}")
    ratio = float(np.max(region.weighted_degree[reach] / run.rho[-1][reach]))
    return m * ratio, m, ratio


def time_derivative_bound_check(run: ExhaustionRun, s: int = 1) -> DerivativeBoundReport:
    """Compare every stored ``|d/dt v_j|`` with the formula constant.

    Spectral solutions carry exact time derivatives; grid solutions use
    backward differences, which are what the implicit scheme satisfies.
    """
    C, m, ratio = derivative_bound_constant(run, s)
    worst, where = 0.0, None
    for i, sol in enumerate(run.solutions):
        n = sol.region.n_interior
        if sol.derivative is not None:
            d = np.abs(sol.derivative)
            offset = 0
        else:
            d = np.abs(np.diff(sol.values[:, :n], axis=0)) / np.diff(run.times)[:, None]
            offset = 1
        k, p = np.unravel_index(int(np.argmax(d)), d.shape)
        if d[k, p] > worst:
            worst, where = float(d[k, p]), (sol.region.interior[p], float(run.times[k + offset]), run.j_list[i])
    return DerivativeBoundReport(C, m, ratio, worst, where, worst <= C * (1 + INVARIANT_TOL))
