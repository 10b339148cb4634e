import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphheat.cauchy import (HeatProblem, TimeData, adaptive_simpson, fourier_coefficients,
                              reduce_boundary, residual_check, solve_backward_euler,
                              solve_spectral, time_grid)
from graphheat.graph_core import make_lattice, make_spherical_tree, materialize_ball
from graphheat.spectral import dirichlet_spectrum


def z2_ball(radius=4):
    return materialize_ball(make_lattice(2), (0, 0), radius)


def test_fourier_coefficients_of_first_mode():
    ball = z2_ball()
    basis = dirichlet_spectrum(ball, 1.0)
    c = fourier_coefficients(basis, basis.eigenvectors[:, 0])
    expected = np.zeros(basis.size)
    expected[0] = 1.0
    assert np.allclose(c, expected, atol=1e-12)
    assert np.all(fourier_coefficients(basis, np.zeros(basis.size)) == 0.0)
    with pytest.raises(ValueError):
        fourier_coefficients(basis, np.zeros(basis.size + 1))


def test_reduce_boundary_constant_data():
    ball = z2_ball(2)
    prob = HeatProblem.simple(ball, 1.0, 0.0, boundary=3.0)
    red = reduce_boundary(prob)
    f = red.source.at(0.5)
    w_out = np.asarray(ball.boundary_coupling.sum(axis=1)).ravel()
    assert np.allclose(f, 3.0 * w_out / ball.interior_measure, rtol=1e-15)
    zero = reduce_boundary(HeatProblem.simple(ball, 1.0, 0.0, source=2.0))
    assert np.all(zero.source.at(0.3) == 2.0)


def test_single_mode_decays_exponentially():
    ball = z2_ball()
    basis = dirichlet_spectrum(ball, 1.0)
    phi = basis.eigenvectors[:, 0]
    prob = HeatProblem.simple(ball, 1.0, phi)
    sol = solve_spectral(prob, dt=0.1, basis=basis)
    for k, t in enumerate(sol.times):
        assert np.allclose(sol.interior[k], math.exp(-basis.eigenvalues[0] * t) * phi, atol=1e-13)


@pytest.mark.parametrize("solver", ["spectral", "euler"])
def test_constants_are_preserved(solver):
    ball = z2_ball()
    prob = HeatProblem.simple(ball, 1.0, 2.5, boundary=2.5)
    sol = solve_spectral(prob, dt=0.1) if solver == "spectral" else solve_backward_euler(prob, 0.1)
    assert np.max(np.abs(sol.values - 2.5)) <= 1e-12


def test_spectral_residual_is_small():
    ball = z2_ball()
    rng = np.random.default_rng(1)
    rho = rng.uniform(0.5, 2.0, ball.n_interior)
    prob = HeatProblem(ball, rho, rng.normal(size=ball.n_interior),
                       TimeData.exponential(rng.normal(size=ball.n_interior), -0.5),
                       TimeData.constant(rng.normal(size=len(ball.boundary))), 0.0, 1.0)
    sol = solve_spectral(prob, dt=0.05)
    assert residual_check(sol, prob) <= 1e-9 * prob.data_scale()


def test_generic_source_uses_quadrature():
    ball = z2_ball(3)
    n = ball.n_interior
    prob = HeatProblem(ball, np.ones(n), np.zeros(n),
                       TimeData.generic(lambda t: np.full(n, math.sin(3 * t)), n),
                       TimeData.zeros(len(ball.boundary)), 0.0, 1.0)
    sol = solve_spectral(prob, dt=0.1)
    assert residual_check(sol, prob) <= 1e-8


def test_euler_residual_is_first_order():
    ball = z2_ball(3)
    prob = HeatProblem.simple(ball, 1.0, np.linspace(-1, 1, ball.n_interior), boundary=0.5)
    r1 = residual_check(solve_backward_euler(prob, 0.02), prob)
    r2 = residual_check(solve_backward_euler(prob, 0.01), prob)
    assert 1.5 <= r1 / r2 <= 2.5


def test_euler_keeps_nonnegativity():
    ball = materialize_ball(make_spherical_tree(lambda m: 2, 8), None, 5)
    u0 = np.zeros(ball.n_interior)
    u0[0] = 1.0
    sol = solve_backward_euler(HeatProblem.simple(ball, 0.3, u0, source=0.1), 0.05)
    assert np.min(sol.values) >= 0.0


def test_residual_sample_at_grid_end_is_rejected():
    ball = z2_ball(2)
    prob = HeatProblem.simple(ball, 1.0, 1.0)
    sol = solve_backward_euler(prob, 0.1)
    with pytest.raises(ValueError):
        residual_check(sol, prob, samples=[((0, 0), 0)])


def test_problem_validation():
    ball = z2_ball(2)
    with pytest.raises(ValueError):
        HeatProblem.simple(ball, 0.0, 1.0)
    with pytest.raises(ValueError):
        HeatProblem.simple(ball, 1.0, 1.0, t1=1.0, t2=1.0)
    with pytest.raises(ValueError):
        time_grid(0.0, 1.0, 0.3)


def test_adaptive_simpson_integrates_exponential():
    val = adaptive_simpson(lambda s: np.array([math.exp(s)]), 0.0, 2.0)
    assert abs(val[0] - math.expm1(2.0)) <= 1e-10 * math.expm1(2.0)


def test_write_csv_round_trip(tmp_path):
    ball = z2_ball(2)
    sol = solve_backward_euler(HeatProblem.simple(ball, 1.0, 1.0), 0.5)
    path = tmp_path / "sol.csv"
    sol.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "vertex,t,value"
    assert len(lines) == 1 + len(sol.times) * ball.n_closure


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_spectral_and_euler_agree(seed):
    rng = np.random.default_rng(seed)
    ball = z2_ball(int(rng.integers(2, 5)))
    rho = rng.uniform(0.5, 2.0, ball.n_interior)
    prob = HeatProblem.simple(ball, rho, rng.normal(size=ball.n_interior),
                              boundary=float(rng.normal()))
    a = solve_spectral(prob, dt=0.01)
    b = solve_backward_euler(prob, 0.01)
    assert np.max(np.abs(a.values - b.values)) <= 0.05 * prob.data_scale()
