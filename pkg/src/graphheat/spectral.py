"""Dirichlet eigenpairs of the weighted Laplacian on a finite region."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .graph_core import FiniteRegion, RadialProfile

MAX_DENSE_SIZE = 4000
JACOBI_MAX_SWEEPS = 100
JACOBI_RTOL = 1e-12


class SpectralError(Exception):
    pass


class SpectralSizeError(SpectralError):
    pass


class SpectralConvergenceError(SpectralError):
    def __init__(self, message: str, off_diagonal: float | None = None):
        super().__init__(message)
        self.off_diagonal = off_diagonal


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenvalues in ascending order and eigenvectors orthonormal in ``l2(w mu)``.

    ``eigenvectors[:, i]`` holds the i-th eigenfunction on the interior,
    in region order.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    def inner(self, f, g) -> float:
        return float(np.sum(np.asarray(f) * np.asarray(g) * self.weights))

    def coefficients(self, f) -> np.ndarray:
        """Expansion coefficients ``<f, phi_i>`` of interior values (or rows of values)."""
        return (np.asarray(f) * self.weights) @ self.eigenvectors

    def reconstruct(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs) @ self.eigenvectors.T

    def projector(self, indices) -> np.ndarray:
        phi = self.eigenvectors[:, list(indices)]
        return phi @ (phi.T * self.weights)

    def orthonormality_error(self) -> float:
        gram = self.eigenvectors.T @ (self.eigenvectors * self.weights[:, None])
        return float(np.max(np.abs(gram - np.eye(self.size))))


def _as_interior(region: FiniteRegion, w) -> np.ndarray:
    if callable(w):
        w = [w(x) for x in region.interior]
    w = np.broadcast_to(np.asarray(w, dtype=float), (region.n_interior,)).copy()
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weight must be finite and positive on the interior")
    return w


def assemble_dirichlet_operator(region: FiniteRegion, w) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric dense matrix similar to ``-Lap_w`` with zero boundary data.

    Returns ``(M, wmu)``: ``M = D^{-1/2} K D^{-1/2}`` with ``K`` the interior
    stiffness matrix and ``D = diag(w * mu)``.  Eigenvectors ``v`` of ``M``
    map to eigenfunctions ``v / sqrt(w mu)``.
    """
    n = region.n_interior
    if n > MAX_DENSE_SIZE:
        raise SpectralSizeError(f"{n} interior vertices exceed the dense limit {MAX_DENSE_SIZE}")
    wmu = _as_interior(region, w) * region.interior_measure
    k = region.stiffness.toarray()
    # dividing by the outer product keeps M exactly symmetric
    m = k / np.sqrt(np.outer(wmu, wmu))
    return m, wmu


def _normalise_signs(vecs: np.ndarray) -> np.ndarray:
    for i in range(vecs.shape[1]):
        col = vecs[:, i]
        big = np.flatnonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))
        if big.size and col[big[0]] < 0:
            vecs[:, i] = -col
    return vecs


def jacobi_eigh(a, max_sweeps: int = JACOBI_MAX_SWEEPS, rtol: float = JACOBI_RTOL):
    """Cyclic Jacobi rotations for a real symmetric matrix.

    Sweeps over all ``(p, q)`` pairs until the off-diagonal Frobenius norm
    drops below ``rtol`` times the full norm.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    off = 0.0
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= rtol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * ap - s * aq, s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    else:
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off > rtol * scale:
            raise SpectralConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps", off_diagonal=off / scale)
    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], v[:, order]


def dirichlet_spectrum(region: FiniteRegion, w, method: str = "lapack") -> SpectralBasis:
    """Full Dirichlet spectrum of ``-Lap_w`` on ``region``.

    Parameters
    ----------
    region : FiniteRegion
    w : array_like or callable
        Positive weight on the interior.
    method : {"lapack", "jacobi"}
        ``lapack`` calls ``numpy.linalg.eigh``; ``jacobi`` uses cyclic rotations.
    """
    m, wmu = assemble_dirichlet_operator(region, w)
    if method == "lapack":
        try:
            vals, vecs = np.linalg.eigh(m)
        except np.linalg.LinAlgError as exc:
            raise SpectralConvergenceError(str(exc)) from exc
    elif method == "jacobi":
        vals, vecs = jacobi_eigh(m)
    else:
        raise ValueError(f"unknown method {method!r}")
    vecs = _normalise_signs(vecs / np.sqrt(wmu)[:, None])
    return SpectralBasis(vals, vecs, wmu)


def radial_dirichlet_spectrum(profile: RadialProfile, rho, n_shells: int) -> SpectralBasis:
    """Spectrum of the radial operator on shells ``0..n_shells-1`` with zero data on shell ``n_shells``.

    The tridiagonal operator is symmetrised with the shell weights
    ``rho(m) * |S_m|_mu`` and handed to ``scipy.linalg.eigh_tridiagonal``.
    """
    j = int(n_shells)
    if j < 1 or j > profile.max_shell:
        raise ValueError(f"need 1 <= n_shells <= {profile.max_shell}")
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (j,))
    dp, dm = profile.d_plus[:j], profile.d_minus[:j].copy()
    dm[0] = 0.0
    pi = rho * profile.shell_measure[:j]
    diag = (dp + dm) / rho
    off = -dp[:-1] * profile.shell_measure[: j - 1] / np.sqrt(pi[:-1] * pi[1:])
    vals, vecs = eigh_tridiagonal(diag, off)
    vecs = _normalise_signs(vecs / np.sqrt(pi)[:, None])
    return SpectralBasis(vals, vecs, pi)


def eigen_residual(region: FiniteRegion, w, basis: SpectralBasis) -> np.ndarray:
    """``max |(-Lap_w phi_i) - lambda_i phi_i|`` per eigenpair, via the region Laplacian."""
    w = _as_interior(region, w)
    n = region.n_interior
    full = np.zeros((basis.size, region.n_closure))
    full[:, :n] = basis.eigenvectors.T
    lap = region.laplacian(full)
    res = -lap / w - basis.eigenvalues[:, None] * basis.eigenvectors.T
    return np.max(np.abs(res), axis=1)
