"""Numerical weak maximum principle and comparison against barriers.

Both checks verify their hypotheses first and only then look at the
conclusion, so a report distinguishes "hypothesis failed" from "conclusion
failed".
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph_core import FiniteRegion

WMP_TOL = 1e-10


class CertificateRequired(Exception):
    """A comparison was requested against a barrier without a passing certificate."""


@dataclass
class ComparisonReport:
    violation: float
    location: tuple | None
    samples: int
    tolerance: float
    hypotheses: dict = field(default_factory=dict)
    failed_hypotheses: list = field(default_factory=list)
    path: list | None = None

    @property
    def holds(self) -> bool:
        return not self.failed_hypotheses and self.violation <= self.tolerance

    def to_dict(self) -> dict:
        from .io_utils import checked, format_vertex
        loc = None if self.location is None else {"vertex": format_vertex(self.location[0]),
                                                  "t": self.location[1]}
        return {"violation": checked(self.violation, self.tolerance), "location": loc,
                "samples": self.samples,
                "hypotheses": {k: checked(v, self.tolerance) for k, v in sorted(self.hypotheses.items())},
                "failed_hypotheses": list(self.failed_hypotheses), "holds": self.holds,
                "path": None if self.path is None else [format_vertex(v) for v in self.path]}


def operator_residual(region: FiniteRegion, rho, times, values, derivative=None) -> np.ndarray:
    """``rho u_t - Lap u`` on the interior.

    With an exact ``derivative`` every row is filled.  Otherwise the backward
    difference ``rho (u^k - u^{k-1})/dt`` is used, which is exactly the
    operator an implicit Euler step satisfies; row 0 is ``nan``.
    """
    n = region.n_interior
    lap = region.laplacian(values)
    if derivative is not None:
        return rho * derivative - lap
    u = values[:, :n]
    dudt = np.full_like(u, np.nan)
    dudt[1:] = (u[1:] - u[:-1]) / np.diff(times)[:, None]
    return rho * dudt - lap


def max_attaining_path(region: FiniteRegion, slice_values, start: int, tol: float) -> list:
    """Breadth-first path from ``start`` through vertices within ``tol`` of the value at ``start``.

    Stops at the first boundary vertex reached; if none is reachable the
    returned list is the whole plateau component (in BFS order).
    """
    n = region.n_interior
    top = slice_values[start]
    adj: dict[int, list[int]] = {}
    for r, c in zip(region.rows.tolist(), region.cols.tolist()):
        adj.setdefault(r, []).append(c)
    prev = {start: None}
    queue = deque([start])
    while queue:
        i = queue.popleft()
        if i >= n:
            out = []
            while i is not None:
                out.append(region.closure[i])
                i = prev[i]
            return out[::-1]
        for j in adj.get(i, ()):
            if j not in prev and slice_values[j] >= top - tol:
                prev[j] = i
                queue.append(j)
    return [region.closure[i] for i in prev]


def verify_wmp(region: FiniteRegion, rho, times, values, derivative=None,
               sign: str = "nonpositive", tol: float = WMP_TOL) -> ComparisonReport:
    """Check ``L u <= 0``, ``u <= 0`` off the region and at the first time, then ``u <= 0`` inside.

    ``sign="nonnegative"`` checks the mirrored statement by negating the data.
    The tolerance is relative to the sup norm of the data.
    """
    if sign not in ("nonpositive", "nonnegative"):
        raise ValueError("sign must be 'nonpositive' or 'nonnegative'")
    s = 1.0 if sign == "nonpositive" else -1.0
    vals = s * np.asarray(values, dtype=float)
    deriv = None if derivative is None else s * np.asarray(derivative)
    rho = np.asarray(rho, dtype=float)
    n = region.n_interior
    scale = max(float(np.max(np.abs(vals), initial=0.0)), 1e-300)
    atol = tol * scale

    res = operator_residual(region, rho, times, vals, deriv)
    # L u is compared after dividing by the operator's size, so that the
    # hypothesis test uses the same unit-sup-norm scale as the conclusion
    op_scale = 2.0 * float(np.max(region.weighted_degree, initial=0.0))
    if len(times) > 1:
        op_scale += float(np.max(rho)) / float(np.min(np.diff(times)))
    op_scale = max(op_scale, 1.0)
    hyp = {
        "subsolution": float(np.nanmax(res, initial=-np.inf)) / op_scale,
        "boundary": float(np.max(vals[:, n:], initial=-np.inf)),
        "initial": float(np.max(vals[0, :n], initial=-np.inf)),
    }
    failed = [k for k, v in hyp.items() if v > atol]
    later = vals[1:, :n] if len(times) > 1 else vals[:, :n]
    k, i = np.unravel_index(int(np.argmax(later)), later.shape) if later.size else (0, 0)
    top = float(later[k, i]) if later.size else 0.0
    k = k + 1 if len(times) > 1 else k
    violation = max(top, 0.0)
    report = ComparisonReport(violation, None, int(later.size), atol, hyp, failed)
    if violation > atol:
        report.location = (region.closure[i], float(times[k]))
        report.path = max_attaining_path(region, vals[k], int(i), atol)
    return report


def verify_solution_wmp(solution, problem, sign: str = "nonpositive", tol: float = WMP_TOL):
    """:func:`verify_wmp` on a :class:`HeatSolution` of a homogeneous problem."""
    return verify_wmp(solution.region, problem.rho, solution.times, solution.values,
                      solution.derivative, sign=sign, tol=tol)


def phragmen_lindelof_check(region: FiniteRegion, rho, times, values, barrier, certificate,
                            radii, eps_grid, derivative=None, tol: float = WMP_TOL) -> dict:
    """Compare ``u`` with ``eps * Z`` on concentric balls.

    For each radius and each ``eps`` (ascending), the boundary and initial
    comparisons are checked first; where both hold the interior comparison
    is run through :func:`verify_wmp` applied to ``u - eps Z``.

    ``certificate`` must be a passing parabolic certificate for ``barrier``
    on a region at least as large as ``region``.
    """
    if certificate is None or not certificate.passed:
        raise CertificateRequired("barrier has no passing certificate")
    if certificate.region_radius < region.radius or certificate.family != barrier.family:
        raise CertificateRequired("certificate does not cover this region and barrier")
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (region.n_interior,))
    u_scale = max(float(np.max(np.abs(values))), 1e-300)
    rows = []
    for radius in sorted(radii):
        sub = region.sub_ball(radius)
        idx = np.array([region.index[v] for v in sub.closure])
        u = np.asarray(values)[:, idx]
        du = None if derivative is None else np.asarray(derivative)[:, idx[: sub.n_interior]]
        z = np.array([barrier.values(sub, t) for t in times])
        dz = np.array([barrier.dt_values(sub, t)[: sub.n_interior] for t in times])
        rho_sub = rho[idx[: sub.n_interior]]
        m = sub.n_interior
        best = None
        entries = []
        for eps in sorted(eps_grid):
            w = u - eps * z
            bnd = float(np.max(w[:, m:], initial=-np.inf))
            ini = float(np.max(w[0, :m], initial=-np.inf))
            ok = bnd <= tol * u_scale and ini <= tol * u_scale
            inside = None
            if ok:
                dw = None if du is None else du - eps * dz
                rep = verify_wmp(sub, rho_sub, times, w, dw, tol=tol)
                inside = rep.violation
                ok = rep.holds
            entries.append({"eps": eps, "boundary": bnd, "initial": ini,
                            "interior": inside, "holds": bool(ok)})
            if ok and best is None:
                best = eps
        rows.append({"radius": radius, "min_eps": best, "entries": entries})
    return {"rows": rows, "tolerance": tol}
