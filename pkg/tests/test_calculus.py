import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphheat.calculus import (
    MissingValueError, RegionFunction, check_integration_by_parts, compact_support_laplacian_bound,
    gradient, lattice_neighbor_sums, laplacian, product_rule_residual, radial_laplacian,
    weighted_laplacian)
from graphheat.graph_core import (extract_radial_profile, make_antitree, make_lattice,
                                  make_spherical_tree, materialize_ball, parse_rule)


def test_laplacian_of_square_on_z1_is_one():
    g = make_lattice(1)
    for x in (-4, 0, 7):
        assert laplacian(g, lambda y: y[0] ** 2, (x,)) == 1.0


def test_laplacian_of_constant_vanishes():
    g = make_spherical_tree(lambda m: 3, 6)
    assert laplacian(g, lambda y: 5.0, (2, 4)) == 0.0


def test_weighted_laplacian_divides_by_weight():
    g = make_lattice(2)
    f = lambda y: float(y[0] ** 2 + 3 * y[1])
    assert weighted_laplacian(g, lambda x: 4.0, f, (1, 1)) == laplacian(g, f, (1, 1)) / 4.0
    with pytest.raises(ValueError):
        weighted_laplacian(g, lambda x: 0.0, f, (0, 0))


def test_region_function_reports_missing_vertex():
    ball = materialize_ball(make_lattice(1), (0,), 2)
    f = RegionFunction(ball, np.arange(ball.n_closure, dtype=float))
    with pytest.raises(MissingValueError):
        laplacian(make_lattice(1), f, (2,))


@pytest.mark.parametrize("x, expected", [((1, 2), (4, 44)), ((0, 0, 0), (6, 6)), ((7,), (2, 394))])
def test_lattice_neighbor_sums(x, expected):
    assert lattice_neighbor_sums(len(x), x) == expected


def test_lattice_neighbor_sums_closed_form():
    # first sum is 2n, second is 8|x|^2 + 2n
    rng = np.random.default_rng(3)
    for n in (1, 2, 3, 4):
        for _ in range(50):
            x = tuple(int(v) for v in rng.integers(-500, 500, n))
            s1, s2 = lattice_neighbor_sums(n, x)
            assert s1 == 2 * n and s2 == 8 * sum(c * c for c in x) + 2 * n


def test_integration_by_parts_requires_support_inside():
    g = make_lattice(2)
    ball = materialize_ball(g, (0, 0), 3)
    with pytest.raises(ValueError):
        check_integration_by_parts(g, ball, lambda x: 1.0, lambda x: 1.0)


def test_radial_laplacian_matches_full_laplacian_on_tree():
    g = make_spherical_tree(lambda m: 2, 10)
    prof = extract_radial_profile(g, None, 6)
    f = [math.sin(m) + m * m for m in range(7)]
    radial = lambda y: f[y[0]]
    for m in range(6):
        assert abs(radial_laplacian(prof, f, m) - laplacian(g, radial, (m, 0))) <= 1e-12


def test_radial_laplacian_matches_full_laplacian_on_antitree():
    g = make_antitree(parse_rule("affine:1,1"), "A", 10)
    prof = extract_radial_profile(g, None, 6)
    f = [1.0 / (m + 1) for m in range(7)]
    radial = lambda y: f[y[0]]
    for m in range(6):
        full = laplacian(g, radial, (m, m // 2))
        assert abs(radial_laplacian(prof, f, m) - full) <= 1e-12 * max(1.0, abs(full))


def test_compact_support_bound_examples():
    g = make_lattice(2)
    u = lambda x: 1.0 if x == (0, 0) else 0.0
    lhs, rhs = compact_support_laplacian_bound(g, lambda x: 1.0, u, (0, 0), 1, [(1, 0), (3, 0)])
    assert lhs[0] == 0.25 and rhs[0] == 1.0
    assert lhs[1] == 0.0
    assert np.all(lhs <= rhs)


def test_compact_support_bound_rejects_wide_support():
    g = make_lattice(2)
    with pytest.raises(ValueError):
        compact_support_laplacian_bound(g, lambda x: 1.0, lambda x: 1.0, (0, 0), 1, [(4, 0)])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=4, max_size=4))
def test_product_rule_is_exact(vals):
    f = {(0,): vals[0], (1,): vals[1]}
    h = {(0,): vals[2], (1,): vals[3]}
    res = product_rule_residual(f, h, (0,), (1,))
    scale = max(1.0, *(abs(v) for v in vals)) ** 2
    assert abs(res) <= 1e-12 * scale
    assert gradient(f, (0,), (1,)) == vals[1] - vals[0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_integration_by_parts_random_pairs(seed):
    rng = np.random.default_rng(seed)
    g = make_lattice(2)
    ball = materialize_ball(g, (0, 0), 4)
    fv = dict(zip(ball.interior, rng.normal(size=ball.n_interior)))
    hv = dict(zip(ball.closure, rng.normal(size=ball.n_closure)))
    res = check_integration_by_parts(g, ball, lambda x: fv.get(x, 0.0), lambda x: hv[x])
    assert res <= 1e-12 * 100
