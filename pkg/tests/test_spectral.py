import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphheat.graph_core import (extract_radial_profile, make_lattice, make_spherical_tree,
                                  materialize_ball, radial_region)
from graphheat.spectral import (SpectralConvergenceError, SpectralSizeError,
                                assemble_dirichlet_operator, dirichlet_spectrum, eigen_residual,
                                jacobi_eigh, radial_dirichlet_spectrum)


def two_vertex_region():
    return materialize_ball(make_lattice(1), [(0,), (1,)], 1)


def test_single_vertex_eigenvalue_is_degree_over_rho():
    ball = materialize_ball(make_lattice(3), (0, 0, 0), 1)
    basis = dirichlet_spectrum(ball, 2.5)
    assert basis.size == 1
    assert abs(basis.eigenvalues[0] - 1.0 / 2.5) <= 1e-12


def test_two_vertex_spectrum_and_matrix():
    region = two_vertex_region()
    m, _ = assemble_dirichlet_operator(region, 1.0)
    assert np.allclose(m, [[1.0, -0.5], [-0.5, 1.0]], atol=1e-15)
    vals = dirichlet_spectrum(region, 1.0).eigenvalues
    assert np.allclose(vals, [0.5, 1.5], atol=1e-10)


def test_half_line_radial_spectrum():
    # path 0-1-2 with shells 0, 1 interior: eigenvalues (3 +- sqrt 5)/2
    g = make_spherical_tree(lambda m: 1, 6)
    prof = extract_radial_profile(g, None, 3)
    vals = radial_dirichlet_spectrum(prof, 1.0, 2).eigenvalues
    assert np.allclose(vals, [(3 - math.sqrt(5)) / 2, (3 + math.sqrt(5)) / 2], atol=1e-12)


def test_radial_eigenvalues_appear_in_full_spectrum():
    g = make_spherical_tree(lambda m: 2, 8)
    prof = extract_radial_profile(g, None, 5)
    radial = radial_dirichlet_spectrum(prof, 1.0, 4).eigenvalues
    full = dirichlet_spectrum(materialize_ball(g, None, 4), 1.0).eigenvalues
    for lam in radial:
        assert np.min(np.abs(full - lam)) <= 1e-10


def test_radial_spectrum_matches_quotient_region():
    g = make_spherical_tree(lambda m: 3, 8)
    prof = extract_radial_profile(g, None, 6)
    a = radial_dirichlet_spectrum(prof, 1.0, 6).eigenvalues
    b = dirichlet_spectrum(radial_region(prof, 6), 1.0).eigenvalues
    assert np.allclose(a, b, atol=1e-12)


def test_scaling_rho_scales_eigenvalues():
    ball = materialize_ball(make_lattice(2), (0, 0), 4)
    a = dirichlet_spectrum(ball, 1.0).eigenvalues
    b = dirichlet_spectrum(ball, 3.0).eigenvalues
    assert np.allclose(b, a / 3.0, rtol=1e-12)


def test_jacobi_matches_lapack():
    ball = materialize_ball(make_lattice(2), (0, 0), 4)
    w = lambda x: 1.0 + 0.1 * abs(x[0])
    a = dirichlet_spectrum(ball, w, method="lapack")
    b = dirichlet_spectrum(ball, w, method="jacobi")
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-10)
    assert b.orthonormality_error() <= 1e-10


def test_jacobi_reports_non_convergence():
    a = np.random.default_rng(0).normal(size=(8, 8))
    with pytest.raises(SpectralConvergenceError):
        jacobi_eigh(a + a.T, max_sweeps=1)


def test_dense_size_limit():
    ball = materialize_ball(make_lattice(3), (0, 0, 0), 16)
    with pytest.raises(SpectralSizeError):
        dirichlet_spectrum(ball, 1.0)


def test_weight_must_be_positive():
    with pytest.raises(ValueError):
        dirichlet_spectrum(two_vertex_region(), [1.0, 0.0])


def test_projector_is_idempotent():
    ball = materialize_ball(make_lattice(2), (0, 0), 3)
    basis = dirichlet_spectrum(ball, 1.0)
    p = basis.projector(range(3))
    assert np.allclose(p @ p, p, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["z2", "z3", "tree"]), st.integers(2, 5))
def test_random_regions_orthonormal_and_positive(seed, kind, radius):
    rng = np.random.default_rng(seed)
    g = {"z2": make_lattice(2), "z3": make_lattice(3),
         "tree": make_spherical_tree(lambda m: 2, 10)}[kind]
    ball = materialize_ball(g, None if kind == "tree" else (0,) * g.n, radius)
    w = rng.uniform(0.1, 10.0, ball.n_interior)
    basis = dirichlet_spectrum(ball, w)
    assert basis.orthonormality_error() <= 1e-10
    assert np.max(eigen_residual(ball, w, basis)) <= 1e-9 * max(1.0, basis.eigenvalues[-1])
    assert basis.eigenvalues[0] > 0
