import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphheat.graph_core import (
    BudgetExceeded, CustomGraph, GraphError, NotWeaklySymmetric, TruncatedGraph,
    combinatorial_distance, extract_radial_profile, make_antitree, make_lattice,
    make_spherical_tree, materialize_ball, outer_inner_degree, parse_rule, radial_region,
    symmetry_audit)


def binary_tree(depth=12):
    return make_spherical_tree(lambda m: 2, depth)


def test_lattice_neighbours_and_measure():
    g = make_lattice(3)
    nb = g.neighbors((0, 0, 0))
    assert len(nb) == 6 and all(w == 1.0 for _, w in nb)
    assert g.measure((5, -1, 2)) == 6.0
    assert g.weighted_degree((1, 1, 1)) == 1.0


def test_z1_ball_radius_three():
    ball = materialize_ball(make_lattice(1), (0,), 3)
    assert ball.interior == [(-2,), (-1,), (0,), (1,), (2,)]
    assert sorted(ball.boundary) == [(-3,), (3,)]


def test_z2_euclidean_ball_radius_two_has_nine_points():
    ball = materialize_ball(make_lattice(2), (0, 0), 2, "euclidean")
    assert ball.n_interior == 9
    assert all(x * x + y * y < 4 for x, y in ball.interior)


def test_tree_ball_radius_three_has_seven_vertices():
    ball = materialize_ball(binary_tree(), None, 3)
    assert ball.n_interior == 7
    assert len(ball.boundary) == 8


def test_z2_outer_inner_degree():
    assert outer_inner_degree(make_lattice(2), (1, 0), (0, 0)) == (0.75, 0.25)


@pytest.mark.parametrize("conv, expected", [("A", (2.0, 4.0)), ("B", (4.0, 2.0))])
def test_antitree_conventions_at_second_sphere(conv, expected):
    g = make_antitree(parse_rule("affine:1,1"), conv, 10)
    assert outer_inner_degree(g, (2, 0)) == expected


def test_tree_profile_degrees():
    prof = extract_radial_profile(binary_tree(), None, 6)
    assert np.all(prof.d_plus == 2.0)
    assert prof.d_minus[0] == 0.0 and np.all(prof.d_minus[1:] == 1.0)
    assert prof.shell_card == (1, 2, 4, 8, 16, 32, 64)
    assert np.max(prof.detailed_balance_residual()) <= 1e-12


def test_lattice_profile_is_not_weakly_symmetric():
    with pytest.raises(NotWeaklySymmetric) as exc:
        extract_radial_profile(make_lattice(2), (0, 0), 2)
    assert exc.value.shell == 2


def test_budget_is_enforced():
    with pytest.raises(BudgetExceeded):
        materialize_ball(make_lattice(3), (0, 0, 0), 40, budget=1000)


def test_euclidean_ball_rejected_off_lattice():
    with pytest.raises(ValueError):
        materialize_ball(binary_tree(), None, 3, "euclidean")


def test_radial_region_needs_enough_shells():
    prof = extract_radial_profile(binary_tree(), None, 4)
    with pytest.raises(TruncatedGraph):
        radial_region(prof, 5)


def test_sub_ball_matches_direct_materialisation():
    g = make_lattice(2)
    big = materialize_ball(g, (0, 0), 8)
    sub = big.sub_ball(5)
    direct = materialize_ball(g, (0, 0), 5)
    assert sub.interior == direct.interior
    assert sorted(sub.boundary) == sorted(direct.boundary)
    with pytest.raises(GraphError):
        big.sub_ball(9)


def test_parse_rule_forms():
    assert parse_rule("const:3")(7) == 3
    assert parse_rule("affine:2,1")(4) == 6
    assert parse_rule("list:1,2,3")(1) == 2
    with pytest.raises(ValueError):
        parse_rule("nonsense")


def test_symmetry_audit_detects_asymmetric_weight():
    def nb(x):
        if x == (0,):
            return [((1,), 1.0)]
        return [((0,), 2.0)]
    g = CustomGraph(nb, lambda x: 1.0, root=(0,))
    assert symmetry_audit(g, [(0,), (1,)])
    assert not symmetry_audit(make_lattice(2), [(0, 0), (1, 0)])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=3, max_size=3))
def test_lattice_distance_is_l1(x):
    g = make_lattice(3)
    assert combinatorial_distance(g, tuple(x), (0, 0, 0)) == sum(abs(c) for c in x)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 6))
def test_ball_edges_are_symmetric(n, radius):
    ball = materialize_ball(make_lattice(n), (0,) * n, radius)
    m = ball.n_interior
    inner = ball.cols < m
    pairs = set(zip(ball.rows[inner].tolist(), ball.cols[inner].tolist()))
    assert all((j, i) in pairs for i, j in pairs)
