"""Barrier families, densities, and numeric certification of supersolution inequalities.

Barriers are evaluated in log space.  The parabolic residual is
``Z * [rho d/dt(log Z) - sum_y (w/mu)(exp(log Z(y) - log Z(x)) - 1)]`` so that
``Z`` itself is never formed when it would overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse.linalg import spsolve

from .graph_core import (AntiTree, FiniteRegion, GraphError, Lattice, RadialProfile, WeightedGraph,
                         combinatorial_distance, materialize_ball, outer_inner_degree)
from .io_utils import checked, format_vertex

CERT_TOL = 1e-12
Q_SEARCH_FACTOR = 2.0
Q_SEARCH_CAP = 1e6
DEFAULT_TIME_NODES = 11


class BarrierError(ValueError):
    """Parameters outside a family's admissible set, or an uncertified input."""


class NonSummableError(BarrierError):
    pass


# --------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class DensitySpec:
    """Positive density ``rho`` on vertices.

    ``side`` records whether the family is used as a lower bound (uniqueness
    experiments) or an upper bound (non-uniqueness experiments).
    """

    family: str
    params: dict = field(default_factory=dict)
    side: str | None = None
    rule: Callable | None = None

    def __post_init__(self):
        if self.family not in ("power_decay", "outer_degree_scaled", "log_power", "constant", "custom"):
            raise ValueError(f"unknown density family {self.family!r}")
        if self.side not in (None, "lower", "upper"):
            raise ValueError("side must be 'lower', 'upper' or None")
        if self.family == "custom" and self.rule is None:
            raise ValueError("custom densities need a rule")

    @classmethod
    def power_decay(cls, c0: float, alpha: float, metric: str = "combinatorial", side=None):
        if c0 <= 0 or alpha < 0:
            raise ValueError("power decay needs c0 > 0 and alpha >= 0")
        return cls("power_decay", {"c0": float(c0), "alpha": float(alpha), "metric": metric}, side)

    @classmethod
    def outer_degree_scaled(cls, rho0: float, side="lower"):
        if rho0 <= 0:
            raise ValueError("rho0 must be positive")
        return cls("outer_degree_scaled", {"rho0": float(rho0)}, side)

    @classmethod
    def log_power(cls, rho0: float, beta: float, side="lower"):
        if rho0 <= 0 or not 0 < beta <= 1:
            raise ValueError("log power needs rho0 > 0 and 0 < beta <= 1")
        return cls("log_power", {"rho0": float(rho0), "beta": float(beta)}, side)

    @classmethod
    def constant(cls, value: float = 1.0, side=None):
        if value <= 0:
            raise ValueError("density must be positive")
        return cls("constant", {"value": float(value)}, side)

    @classmethod
    def custom(cls, rule: Callable, side=None, label: str = "custom"):
        return cls("custom", {"label": label}, side, rule)

    def _from_geometry(self, r, norm, d_plus) -> np.ndarray:
        p = self.params
        if self.family == "constant":
            return np.full(len(r), p["value"])
        if self.family == "power_decay":
            d = norm() if p["metric"] == "euclidean" else np.asarray(r, dtype=float)
            return p["c0"] * (1.0 + d) ** (-p["alpha"])
        if self.family == "outer_degree_scaled":
            return p["rho0"] * d_plus() / (np.asarray(r, dtype=float) + 1.0)
        if self.family == "log_power":
            r = np.asarray(r, dtype=float)
            return d_plus() / (r + 1.0) * np.exp(p["rho0"] * np.log(r + 2.0) ** p["beta"])
        raise AssertionError(self.family)

    def on_region(self, region: FiniteRegion) -> np.ndarray:
        """Density on the interior of ``region`` (distances measured from its seed)."""
        n = region.n_interior
        if self.family == "custom":
            rho = np.array([self.rule(x) for x in region.interior], dtype=float)
        else:
            rho = self._from_geometry(region.shell[:n], lambda: np.sqrt(region.norm_sq[:n]),
                                      lambda: region.outer_degree)
        if np.any(~(rho > 0)) or np.any(~np.isfinite(rho)):
            raise ValueError(f"density {self.family} is not positive on the region")
        return rho

    def at(self, g: WeightedGraph, x, seed=None) -> float:
        if self.family == "custom":
            return float(self.rule(g.vertex(x)))
        x = g.vertex(x)
        r = combinatorial_distance(g, x, seed)
        norm = lambda: np.array([math.sqrt(sum(c * c for c in x))])
        dp = lambda: np.array([outer_inner_degree(g, x, seed)[0]])
        return float(self._from_geometry(np.array([r]), norm, dp)[0])

    def descriptor(self) -> dict:
        return {"family": self.family, **{k: v for k, v in self.params.items()}, "side": self.side}


# --------------------------------------------------------------------------
# barrier families


def _coordinate(region: FiniteRegion, metric: str) -> np.ndarray:
    if metric == "combinatorial":
        return region.shell.astype(float)
    if metric == "euclidean":
        return region.norm_sq
    raise ValueError(metric)


@dataclass(frozen=True)
class BarrierSpec:
    """Space-time barrier ``Z = exp(log_z(coord, t))``.

    ``coord`` is the combinatorial distance ``r`` (metric ``combinatorial``)
    or ``|x|^2`` (metric ``euclidean``).  ``dt_log_z`` is the closed-form time
    derivative of ``log Z``.  ``horizon`` is the end of the natural time
    interval (``1/Q`` for the time-dependent families).
    """

    family: str
    params: dict
    metric: str
    log_z: Callable[[np.ndarray, float], np.ndarray]
    dt_log_z: Callable[[np.ndarray, float], np.ndarray]
    horizon: float | None = None

    def log_values(self, region: FiniteRegion, t: float) -> np.ndarray:
        return self.log_z(_coordinate(region, self.metric), t)

    def values(self, region: FiniteRegion, t: float) -> np.ndarray:
        return np.exp(self.log_values(region, t))

    def dt_values(self, region: FiniteRegion, t: float) -> np.ndarray:
        c = _coordinate(region, self.metric)
        return self.dt_log_z(c, t) * np.exp(self.log_z(c, t))

    def with_q(self, q: float) -> "BarrierSpec":
        return _FACTORIES[self.family](**{**self.params, "Q": q})


def _require_positive(**kw):
    for k, v in kw.items():
        if not (isinstance(v, (int, float)) and v > 0):
            raise BarrierError(f"{k} must be positive, got {v!r}")


def thm34_threshold(A: float, rho0: float) -> float:
    """Smallest ``Q`` for which the linear-exponential barrier works off the seed set."""
    return math.expm1(2.0 * A) / (rho0 * A)


def barrier_thm34(A: float, Q: float | str = "auto", rho0: float | None = None) -> BarrierSpec:
    """``Z = exp(A (1 + Q t)(r + 1))``; ``Q="auto"`` uses :func:`thm34_threshold`."""
    if Q == "auto":
        if rho0 is None:
            raise BarrierError("Q='auto' needs rho0")
        _require_positive(A=A, rho0=rho0)
        Q = thm34_threshold(A, rho0)
    _require_positive(A=A, Q=Q)
    return BarrierSpec(
        "thm34", {"A": A, "Q": Q, "rho0": rho0}, "combinatorial",
        lambda r, t: A * (1.0 + Q * t) * (r + 1.0),
        lambda r, t: A * Q * (r + 1.0) + 0.0 * t,
        1.0 / Q)


def barrier_thm35(A: float, Q: float, beta: float, rho0: float, log_shift: int = 1) -> BarrierSpec:
    """``Z = exp(A (1 + Q t)(r + 1) log^beta(r + shift))``.

    ``log_shift=1`` is the literal family, which equals 1 on the seed set for
    every ``t``.  ``log_shift=2`` keeps the growth rate but stays time
    dependent at ``r = 0``.
    """
    _require_positive(A=A, Q=Q, beta=beta, rho0=rho0)
    if beta > 1:
        raise BarrierError("beta must lie in (0, 1]")
    if A > rho0 / 2:
        raise BarrierError(f"A={A} exceeds rho0/2={rho0 / 2}")
    if log_shift not in (1, 2):
        raise BarrierError("log_shift must be 1 or 2")
    lp = lambda r: np.log(r + log_shift) ** beta
    return BarrierSpec(
        "thm35", {"A": A, "Q": Q, "beta": beta, "rho0": rho0, "log_shift": log_shift},
        "combinatorial",
        lambda r, t: A * (1.0 + Q * t) * (r + 1.0) * lp(r),
        lambda r, t: A * Q * (r + 1.0) * lp(r),
        1.0 / Q)


def constant_spacetime(value: float = 1.0) -> BarrierSpec:
    """``Z = value`` for all ``(x, t)``; a degenerate member used as a sanity check."""
    _require_positive(value=value)
    lv = math.log(value)
    return BarrierSpec("constant", {"value": value}, "combinatorial",
                       lambda c, t: np.full(np.shape(c), lv),
                       lambda c, t: np.zeros(np.shape(c)), None)


def lattice_beta(alpha: float) -> float:
    return min(0.5, 1.0 - alpha / 2.0)


def barrier_lattice(alpha: float, A: float, Q: float, beta: float | str = "auto") -> BarrierSpec:
    """Euclidean barrier on lattices, with ``s = |x|^2``.

    For ``alpha < 2``: ``log Z = A (1 + Q t)(1 + s)^beta``.  For ``alpha = 2``:
    ``log Z = A (1 + Q t) log^2(2 + s)``.
    """
    if not 0 <= alpha <= 2:
        raise BarrierError(f"alpha must lie in [0, 2], got {alpha}")
    _require_positive(A=A, Q=Q)
    if alpha == 2:
        return BarrierSpec(
            "lattice_crit", {"alpha": alpha, "A": A, "Q": Q}, "euclidean",
            lambda s, t: A * (1.0 + Q * t) * np.log(2.0 + s) ** 2,
            lambda s, t: A * Q * np.log(2.0 + s) ** 2,
            1.0 / Q)
    b = lattice_beta(alpha) if beta == "auto" else float(beta)
    if not 0 < b <= lattice_beta(alpha):
        raise BarrierError(f"beta={b} outside (0, {lattice_beta(alpha)}]")
    return BarrierSpec(
        "lattice_sub2", {"alpha": alpha, "A": A, "Q": Q, "beta": b}, "euclidean",
        lambda s, t: A * (1.0 + Q * t) * (1.0 + s) ** b,
        lambda s, t: A * Q * (1.0 + s) ** b,
        1.0 / Q)


def _lattice_factory(alpha, A, Q, beta=None):
    return barrier_lattice(alpha, A, Q, "auto" if beta is None else beta)


_FACTORIES = {
    "thm34": lambda A, Q, rho0=None: barrier_thm34(A, Q, rho0),
    "thm35": barrier_thm35,
    "lattice_sub2": _lattice_factory,
    "lattice_crit": _lattice_factory,
    "constant": lambda value, Q=None: constant_spacetime(value),
}


@dataclass(frozen=True)
class StaticBarrier:
    """Time-independent positive function of ``r`` or ``|x|^2``.

    ``difference(c_y, c_x)`` may supply an accurate ``Z(y) - Z(x)``.
    """

    family: str
    params: dict
    metric: str
    value: Callable[[np.ndarray], np.ndarray]
    difference: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def values(self, region: FiniteRegion) -> np.ndarray:
        return self.value(_coordinate(region, self.metric))

    def __call__(self, x) -> float:
        x = tuple(x)
        c = float(sum(v * v for v in x)) if self.metric == "euclidean" else float(x[0])
        return float(self.value(np.array([c]))[0])


def constant_barrier(value: float = 1.0) -> StaticBarrier:
    _require_positive(value=value)
    return StaticBarrier("constant", {"value": value}, "combinatorial",
                         lambda c: np.full(np.shape(c), float(value)),
                         lambda a, b: np.zeros(np.shape(a)))


def loglog_difference(s_y: np.ndarray, s_x: np.ndarray) -> np.ndarray:
    """``loglog(4 + s_y) - loglog(4 + s_x)`` without cancellation."""
    inner = np.log1p((s_y - s_x) / (4.0 + s_x))
    return np.log1p(inner / np.log(4.0 + s_x))


def loglog_laplacian(points) -> np.ndarray:
    """Lattice Laplacian of ``loglog(4 + |x|^2)`` on Z^2 at the given integer points."""
    x = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    s = np.einsum("ij,ij->i", x, x).astype(float)
    acc = np.zeros(len(x))
    for k in range(2):
        for step in (-1, 1):
            sy = s + 2.0 * step * x[:, k] + 1.0
            acc += loglog_difference(sy, s)
    return acc / 4.0


def z2_loglog(K: float) -> StaticBarrier:
    _require_positive(K=K)
    return StaticBarrier("z2_loglog", {"K": K}, "euclidean",
                         lambda s: K * np.log(np.log(4.0 + s)),
                         lambda sy, sx: K * loglog_difference(sy, sx))


def barrier_z2_static(K: float | str, rho: DensitySpec, scan_radius: int = 400) -> StaticBarrier:
    """``K loglog(|x|^2 + 4)`` on Z^2; ``K="auto"`` runs the two-regime choice.

    The auto choice finds ``R0`` beyond which the Laplacian of ``loglog`` is
    negative on the scanned disc of radius ``scan_radius``, then takes
    ``K = min rho / max |Lap loglog|`` over ``B_{R0}``.
    """
    if K != "auto":
        return z2_loglog(K)
    g = Lattice(2)
    # the function is symmetric under the lattice reflections, so one quadrant suffices
    ax = np.arange(scan_radius + 1)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    inside = xx ** 2 + yy ** 2 < scan_radius ** 2
    pts = np.stack([xx[inside], yy[inside]], axis=1)
    lap = loglog_laplacian(pts)
    norms = np.sqrt(np.einsum("ij,ij->i", pts, pts).astype(float))
    bad = norms[lap >= 0]
    r0 = float(math.floor(bad.max()) + 1.0) if bad.size else 1.0
    if r0 >= scan_radius / 2:
        raise BarrierError(f"Laplacian of loglog not negative beyond {r0} within the scan")
    core = materialize_ball(g, (0, 0), r0, "euclidean")
    rho_core = rho.on_region(core)
    lap_core = loglog_laplacian(core.coords[: core.n_interior])
    k = float(np.min(rho_core) / np.max(np.abs(lap_core)))
    z = z2_loglog(k)
    return StaticBarrier(z.family, {"K": k, "R0": r0, "scan_radius": scan_radius},
                         z.metric, z.value, z.difference)


def barrier_antitree(g: WeightedGraph, K: float) -> StaticBarrier:
    """``K r + 1`` on an anti-tree."""
    if not isinstance(g, AntiTree):
        raise BarrierError("the linear barrier is defined for anti-trees only")
    _require_positive(K=K)
    return StaticBarrier("antitree_linear", {"K": K, "convention": g.convention}, "combinatorial",
                         lambda r: K * r + 1.0, lambda ry, rx: K * (ry - rx))


def antitree_shell_laplacian(profile: RadialProfile, K: float) -> np.ndarray:
    """``Lap(K r + 1)`` on shells ``0..M-1`` from the radial formula."""
    out = K * (profile.d_plus - profile.d_minus)
    out[0] = K * profile.d_plus[0]
    return out[:-1]


def lift_static(Z: StaticBarrier, gamma: float, certificate: "EllipticCertificate") -> BarrierSpec:
    """``exp(gamma t) Z(x)`` from a certified static barrier with ``inf Z >= c0``.

    Requires ``gamma > 1/c0`` strictly, with ``c0`` the minimum recorded in
    the certificate.
    """
    if certificate is None or not certificate.passed or certificate.direction != "le_rho":
        raise BarrierError("lifting needs a passing certificate of Lap Z <= rho")
    if certificate.family != Z.family or certificate.params != Z.params:
        raise BarrierError("certificate was issued for a different function")
    c0 = certificate.min_value
    if not c0 > 0:
        raise BarrierError(f"inf Z = {c0} is not positive")
    if not gamma > 1.0 / c0:
        raise BarrierError(f"gamma={gamma} must exceed 1/c0={1.0 / c0}")
    log_static = lambda c: np.log(Z.value(c))
    return BarrierSpec("lifted", {"gamma": gamma, "c0": c0, "base": Z.family, **Z.params},
                       Z.metric, lambda c, t: gamma * t + log_static(c),
                       lambda c, t: np.full(np.shape(c), float(gamma)), None)


# --------------------------------------------------------------------------
# certification


@dataclass
class ParabolicCertificate:
    family: str
    params: dict
    region: dict
    region_radius: float
    interval: tuple
    n_times: int
    min_residual: float
    min_log_abs_residual: float
    min_normalized: float
    argmin: tuple
    passed: bool
    tolerance: float = CERT_TOL
    shells: tuple = (0, None)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params, "region": self.region,
                "interval": list(self.interval), "time_nodes": self.n_times,
                "shells": list(self.shells),
                "min_residual": checked(self.min_residual, self.tolerance),
                "min_log_abs_residual": self.min_log_abs_residual,
                "min_normalized_residual": checked(self.min_normalized, self.tolerance),
                "argmin": {"vertex": format_vertex(self.argmin[0]), "t": self.argmin[1]},
                "pass": self.passed, "notes": list(self.notes)}


def _rho_array(rho, region) -> np.ndarray:
    if isinstance(rho, DensitySpec):
        return rho.on_region(region)
    return np.broadcast_to(np.asarray(rho, dtype=float), (region.n_interior,))


def certify_parabolic(Z: BarrierSpec, rho, region: FiniteRegion, interval=None,
                      n_times: int = DEFAULT_TIME_NODES, min_shell: int = 0,
                      max_shell: int | None = None, tol: float = CERT_TOL) -> ParabolicCertificate:
    """Check ``rho dZ/dt - Lap Z >= 0`` on interior vertices and a uniform time grid.

    A point passes when the bracket ``rho d(log Z)/dt - Lap Z / Z`` is at
    least ``-tol`` times its local scale.  The reported minimum and argmin
    refer to the raw residual ``Z * bracket``, compared in log space.
    ``min_shell``/``max_shell`` restrict the checked vertices by distance
    from the seed.
    """
    if interval is None:
        interval = (0.0, Z.horizon if Z.horizon is not None else 1.0)
    times = np.linspace(interval[0], interval[1], n_times)
    rho = _rho_array(rho, region)
    n = region.n_interior
    shells = region.shell[:n]
    sel = shells >= min_shell
    if max_shell is not None:
        sel &= shells <= max_shell
    if not sel.any():
        raise BarrierError("no interior vertex in the requested shell range")
    coord = _coordinate(region, Z.metric)
    rows, cols = region.rows, region.cols
    wmu = region.weights / region.interior_measure[rows]
    best_key, best_sign, best_at, worst_norm, passed = math.inf, 1.0, None, math.inf, True
    for t in times:
        lz = Z.log_z(coord, t)
        d = lz[cols] - lz[rows]
        ratio = np.bincount(rows, weights=wmu * np.expm1(d), minlength=n)
        spread = np.bincount(rows, weights=wmu * (np.exp(d) + 1.0), minlength=n)
        dt = Z.dt_log_z(coord[:n], t)
        bracket = rho * dt - ratio
        scale = np.abs(rho * dt) + spread
        normalized = bracket / scale
        ok = normalized >= -tol
        passed &= bool(np.all(ok[sel]))
        worst_norm = min(worst_norm, float(np.min(normalized[sel])))
        # raw residual Z*bracket ordered by sign, then by log magnitude
        with np.errstate(divide="ignore"):
            logabs = lz[:n] + np.log(np.abs(bracket))
        neg = sel & (bracket < 0)
        if neg.any():
            i = int(np.flatnonzero(neg)[np.argmax(logabs[neg])])
            key, sign = -logabs[i], -1.0
        else:
            cand = np.flatnonzero(sel)
            i = int(cand[np.argmin(logabs[cand])])
            key, sign = logabs[i], 1.0
        if (sign, key) < (best_sign, best_key):
            best_sign, best_key, best_at = sign, key, (i, float(t))
    i, t = best_at
    log_abs = -best_key if best_sign < 0 else best_key
    raw = best_sign * math.exp(log_abs) if log_abs < 700 else best_sign * math.inf
    return ParabolicCertificate(Z.family, dict(Z.params), region.descriptor(), region.radius,
                                (float(interval[0]), float(interval[1])), n_times, raw,
                                float(log_abs), worst_norm, (region.interior[i], t), passed, tol,
                                (min_shell, max_shell))


def search_minimal_q(make: Callable[[float], BarrierSpec], rho, region: FiniteRegion, q_start: float,
                     factor: float = Q_SEARCH_FACTOR, cap: float = Q_SEARCH_CAP,
                     n_times: int = DEFAULT_TIME_NODES, min_shell: int = 0):
    """First ``Q`` on the grid ``q_start * factor^k <= cap`` whose barrier certifies.

    Returns ``(Q, certificate, trail)`` with ``trail`` the list of ``(Q, pass)``
    visited; ``Q`` is ``None`` if nothing up to ``cap`` passes.
    """
    trail = []
    q = float(q_start)
    cert = None
    while q <= cap * (1 + 1e-12):
        cert = certify_parabolic(make(q), rho, region, n_times=n_times, min_shell=min_shell)
        trail.append((q, cert.passed))
        if cert.passed:
            return q, cert, trail
        q *= factor
    return None, cert, trail


def certify_with_core(Z: BarrierSpec, rho, region: FiniteRegion, n_times: int = DEFAULT_TIME_NODES,
                      factor: float = Q_SEARCH_FACTOR, cap: float = Q_SEARCH_CAP):
    """Certify off the seed set, then enlarge ``Q`` until the seed set certifies too.

    Returns ``(outer_certificate, full_certificate, Q)``; the full certificate
    covers every interior vertex at the final ``Q``.
    """
    outer = certify_parabolic(Z, rho, region, n_times=n_times, min_shell=1)
    if not outer.passed:
        return outer, None, Z.params["Q"]
    q = Z.params["Q"]
    while q <= cap:
        full = certify_parabolic(Z.with_q(q), rho, region, n_times=n_times)
        if full.passed:
            return outer, full, q
        q *= factor
    return outer, full, q


@dataclass
class EllipticCertificate:
    family: str
    params: dict
    direction: str
    region: dict
    max_residual: float
    argmax: tuple | None
    passed: bool
    min_value: float
    excluded_radius: float | None
    tolerance: float = CERT_TOL

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params, "direction": self.direction,
                "region": self.region,
                "max_residual": checked(self.max_residual, self.tolerance),
                "argmax": None if self.argmax is None else format_vertex(self.argmax),
                "pass": self.passed, "min_value": self.min_value,
                "excluded_radius": self.excluded_radius}


def _closure_values(fn, region: FiniteRegion):
    if isinstance(fn, StaticBarrier):
        c = _coordinate(region, fn.metric)
        diff = None if fn.difference is None else (lambda: fn.difference(c[region.cols], c[region.rows]))
        return fn.values(region), diff, fn.family, dict(fn.params)
    if isinstance(fn, (RadialH, BallH)):
        return fn.on_region(region), None, fn.family, fn.params()
    vals = np.asarray(fn, dtype=float)
    if vals.shape != (region.n_closure,):
        raise ValueError("need closure values")
    return vals, None, "values", {}


def certify_elliptic(fn, rho, region: FiniteRegion, direction: str = "le_rho",
                     exclude_radius: float | None = None, tol: float = CERT_TOL) -> EllipticCertificate:
    """``max(Lap Z - rho)`` (``le_rho``) or ``max(Lap h + rho)`` (``le_neg_rho``) on the interior.

    Vertices closer to the seed than ``exclude_radius`` are skipped (graph
    distance, or Euclidean distance on Euclidean regions).  Passes when the
    maximum is at most ``tol`` times the local scale.
    """
    if direction not in ("le_rho", "le_neg_rho"):
        raise ValueError("direction must be 'le_rho' or 'le_neg_rho'")
    vals, diff, family, params = _closure_values(fn, region)
    rho = _rho_array(rho, region)
    n = region.n_interior
    rows, cols = region.rows, region.cols
    wmu = region.weights / region.interior_measure[rows]
    d = diff() if diff is not None else vals[cols] - vals[rows]
    lap = np.bincount(rows, weights=wmu * d, minlength=n)
    if diff is not None:
        mag = np.bincount(rows, weights=wmu * np.abs(d), minlength=n)
    else:
        mag = np.bincount(rows, weights=wmu * (np.abs(vals[cols]) + np.abs(vals[rows])), minlength=n)
    res = lap - rho if direction == "le_rho" else lap + rho
    scale = rho + mag
    keep = np.ones(n, dtype=bool)
    if exclude_radius is not None:
        dist = np.sqrt(region.norm_sq[:n]) if region.metric == "euclidean" else region.shell[:n]
        keep = dist >= exclude_radius
    if not keep.any():
        return EllipticCertificate(family, params, direction, region.descriptor(), -math.inf, None,
                                   True, float(np.min(vals)), exclude_radius, tol)
    idx = np.flatnonzero(keep)
    j = idx[np.argmax(res[idx] / scale[idx])]
    passed = bool(np.all(res[idx] <= tol * scale[idx]))
    return EllipticCertificate(family, params, direction, region.descriptor(), float(res[j]),
                               region.interior[j], passed, float(np.min(vals)), exclude_radius, tol)


# --------------------------------------------------------------------------
# the decaying barrier h


@dataclass(frozen=True)
class RadialH:
    """Radial ``h`` with ``Lap h = -rho`` for shells ``1..M-1`` and ``h(M) = tail``."""

    values: np.ndarray
    terms: np.ndarray
    tail: float
    decay: dict
    family: str = "radial_h"

    def params(self) -> dict:
        return {"M": len(self.values) - 1, "tail": self.tail}

    def on_region(self, region: FiniteRegion) -> np.ndarray:
        shell = region.shell
        if shell.max() >= len(self.values):
            raise GraphError("region reaches beyond the shells where h was built")
        return self.values[shell]


def construct_radial_h(profile: RadialProfile, rho, max_shell: int | None = None) -> RadialH:
    """Flux-form solution of the radial equation ``Lap h = -rho``.

    With ``W(k)`` the edge mass from shell ``k`` to ``k+1`` and ``S(k)`` the
    ``rho``-mass of shells ``0..k``, ``h(m) = sum_{k>=m} S(k)/W(k)``.  The sum
    is truncated at ``M`` and the remainder replaced by a tail estimate from
    the decay of the terms; non-decaying terms raise :class:`NonSummableError`.
    """
    m_max = profile.max_shell if max_shell is None else int(max_shell)
    if m_max < 8:
        raise BarrierError("need at least 8 shells to judge summability")
    rho = np.asarray(rho, dtype=float)
    rho = np.full(m_max, float(rho)) if rho.ndim == 0 else rho[:m_max]
    if len(rho) < m_max:
        raise ValueError(f"need rho on shells 0..{m_max - 1}")
    sm = profile.shell_measure[:m_max]
    mass = np.cumsum(sm * rho)
    flux = profile.edge_mass()[:m_max]
    terms = mass / flux
    half = terms[m_max // 2:]
    k = np.arange(m_max // 2, m_max) + 1.0
    ratio = float(np.max(half[1:] / half[:-1]))
    slope = -float(np.polyfit(np.log(k), np.log(half), 1)[0])
    last = float(terms[-1])
    if ratio < 0.9:
        tail = last * ratio / (1.0 - ratio)
        decay = {"kind": "geometric", "ratio": ratio}
    elif slope > 1.05:
        tail = last * m_max / (slope - 1.0)
        decay = {"kind": "power", "exponent": slope}
    else:
        raise NonSummableError(
            f"flux terms S(k)/W(k) do not decay summably (ratio {ratio:.4f}, exponent {slope:.3f})")
    values = np.empty(m_max + 1)
    values[m_max] = tail
    values[:m_max] = tail + np.cumsum(terms[::-1])[::-1]
    return RadialH(values, terms, tail, decay)


@dataclass(frozen=True)
class BallH:
    """Solution of ``Lap h = -rho`` on a ball with ``h = 0`` on the boundary layer."""

    region: FiniteRegion
    values: np.ndarray
    residual: float
    family: str = "ball_h"

    def params(self) -> dict:
        return {"radius": self.region.radius}

    def on_region(self, region: FiniteRegion) -> np.ndarray:
        if region is self.region:
            return self.values
        idx = self.region.index
        return np.array([self.values[idx[v]] if v in idx else 0.0 for v in region.closure])

    def radial_report(self) -> list[tuple[float, float]]:
        """``(|x|, max h)`` over vertices grouped by integer part of the norm."""
        norm = np.sqrt(self.region.norm_sq) if self.region.coords is not None else self.region.shell
        bins = np.floor(norm).astype(int)
        return [(float(b), float(np.max(self.values[bins == b]))) for b in np.unique(bins)]


def construct_ball_h(region: FiniteRegion, rho) -> BallH:
    """Sparse solve of the Dirichlet problem ``-Lap h = rho`` on ``region``."""
    rho = _rho_array(rho, region)
    n = region.n_interior
    h = np.zeros(region.n_closure)
    h[:n] = spsolve(region.stiffness, region.interior_measure * rho)
    residual = float(np.max(np.abs(region.laplacian(h) + rho)))
    return BallH(region, h, residual)
