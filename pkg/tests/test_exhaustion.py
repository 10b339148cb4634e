import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphheat.barriers import DensitySpec, certify_elliptic, construct_radial_h
from graphheat.exhaustion import (
    ExhaustionError, InitialDatum, PreconditionRefused, certify_decay_envelope,
    check_nonuniqueness_preconditions, derivative_bound_constant, nonuniqueness_exhibit,
    run_exhaustion, run_exhaustion_with_boundary, time_derivative_bound_check, validate_initial)
from graphheat.graph_core import (extract_radial_profile, make_lattice, make_spherical_tree,
                                  materialize_ball, radial_region)

TREE = make_spherical_tree(lambda m: 2, 64)
RHO_TREE = DensitySpec.power_decay(1.0, 2.0, "combinatorial", "upper")
ROOT = InitialDatum.indicator(0.0, [(0, 0)], 1.0, rhat=1)


def test_shift_mode_invariants():
    run = run_exhaustion(TREE, RHO_TREE, ROOT, [5, 10, 20], 1.0, 0.05)
    assert run.M == 1.0
    for sol in run.solutions:
        assert np.min(sol.values) >= -1e-9 and np.max(sol.values) <= 1.0 + 1e-9
    assert all(g >= 0 for g in run.gaps)
    assert run.gaps[-1] <= run.gaps[0]


def test_boundary_mode_is_nonincreasing_and_bounded():
    run = run_exhaustion_with_boundary(TREE, RHO_TREE, ROOT, 1.0, [5, 10, 20], 1.0, 0.05)
    for sol in run.solutions:
        assert np.min(sol.values) >= -1e-9 and np.max(sol.values) <= 1.0 + 1e-9
    small, big = run.regions[0], run.regions[1]
    idx = [big.index[v] for v in small.closure]
    assert np.all(run.solutions[1].values[:, idx] <= run.solutions[0].values + 1e-9)


def test_boundary_below_max_is_refused():
    with pytest.raises(PreconditionRefused):
        run_exhaustion_with_boundary(TREE, RHO_TREE, ROOT, 0.5, [5, 10], 1.0, 0.1)


def test_radial_and_full_paths_agree():
    a = run_exhaustion(TREE, RHO_TREE, ROOT, [4, 6], 0.5, 0.05, solver="radial")
    b = run_exhaustion(TREE, RHO_TREE, ROOT, [4, 6], 0.5, 0.05, solver="spectral")
    ka, pa = a.binned_profile(0.5)
    kb, pb = b.binned_profile(0.5)
    assert np.array_equal(ka, kb)
    assert np.max(np.abs(pa - pb)) <= 1e-10


def test_non_radial_datum_rejected_on_radial_path():
    u0 = InitialDatum.indicator(0.0, [(1, 0)], 1.0, rhat=2)
    with pytest.raises(PreconditionRefused):
        run_exhaustion(TREE, RHO_TREE, u0, [4, 8], 0.5, 0.1)


def test_initial_datum_validation():
    ball = materialize_ball(make_lattice(2), (0, 0), 4)
    bad = InitialDatum(0.0, 1.0, lambda x: -1.0 if x == (0, 0) else 0.0)
    with pytest.raises(PreconditionRefused):
        validate_initial(bad, ball)
    wide = InitialDatum.indicator(0.0, [(2, 0)], 1.0, rhat=1)
    with pytest.raises(PreconditionRefused):
        validate_initial(wide, ball)


def test_j_list_must_increase_and_contain_core():
    with pytest.raises(ExhaustionError):
        run_exhaustion(TREE, RHO_TREE, ROOT, [8, 4], 0.5, 0.1)
    with pytest.raises(ExhaustionError):
        run_exhaustion(TREE, RHO_TREE, InitialDatum.shells(0.0, [1, 1, 1]), [2, 4], 0.5, 0.1)


def test_preconditions():
    assert check_nonuniqueness_preconditions(TREE, RHO_TREE) == "tree"
    with pytest.raises(PreconditionRefused, match="alpha > 1"):
        check_nonuniqueness_preconditions(TREE, DensitySpec.power_decay(1.0, 1.0))
    with pytest.raises(PreconditionRefused, match="b0 >= 2"):
        check_nonuniqueness_preconditions(make_spherical_tree(lambda m: 1, 10), RHO_TREE)
    z3 = make_lattice(3)
    assert check_nonuniqueness_preconditions(z3, DensitySpec.power_decay(1, 3, "euclidean")) == "lattice"
    with pytest.raises(PreconditionRefused, match="alpha > 2"):
        check_nonuniqueness_preconditions(z3, DensitySpec.power_decay(1, 1.5, "euclidean"))
    with pytest.raises(PreconditionRefused, match="n >= 3"):
        check_nonuniqueness_preconditions(make_lattice(2), DensitySpec.power_decay(1, 3, "euclidean"))


def _tree_envelope_inputs():
    run = run_exhaustion(TREE, RHO_TREE, InitialDatum.indicator(0.0, [(0, 0)], 1.0, rhat=2),
                         [20, 40], 1.5, 0.01)
    prof = extract_radial_profile(TREE, None, 40)
    region = radial_region(prof, 40)
    rho = RHO_TREE.on_region(region)
    h = construct_radial_h(prof, rho, 40)
    cert = certify_elliptic(h, rho, region, "le_neg_rho", exclude_radius=2)
    return run, h, cert


def test_envelope_holds_and_detects_injected_fault():
    run, h, cert = _tree_envelope_inputs()
    env = certify_decay_envelope(run, h, cert)
    assert env.holds and env.location is None
    assert env.C >= 2 * env.kappa * env.eps ** 2
    bumped = [sol.values.copy() for sol in run.solutions]
    bumped[-1][:, 30] += 10 * env.C
    bad = certify_decay_envelope(run, h, cert, values=bumped)
    assert not bad.holds and bad.location is not None


def test_envelope_needs_matching_certificate():
    run, h, cert = _tree_envelope_inputs()
    with pytest.raises(PreconditionRefused):
        certify_decay_envelope(run, h, None)
    cert.excluded_radius = 1
    with pytest.raises(PreconditionRefused):
        certify_decay_envelope(run, h, cert)


def test_derivative_bound_constants():
    run = run_exhaustion(TREE, RHO_TREE, InitialDatum.indicator(0.0, [(0, 0)], 1.0, rhat=2),
                         [20], 1.0, 0.05)
    assert derivative_bound_constant(run) == (48.0, 1.0, 48.0)
    run1 = run_exhaustion(TREE, RHO_TREE, ROOT, [20], 1.0, 0.05)
    C1, _, _ = derivative_bound_constant(run1)
    assert C1 == 27.0
    rep = time_derivative_bound_check(run1)
    assert rep.holds and rep.measured <= 27.0


def test_tree_exhibit():
    u0 = InitialDatum.indicator(0.0, [(0, 0)], 1.0, rhat=2)
    ex = nonuniqueness_exhibit(TREE, RHO_TREE, u0, 1.0, [20, 40, 60])
    assert ex.passed and ex.shared_initial and ex.envelope.holds
    assert ex.separation_at(40) >= 0.5
    rows = ex.profile_rows()
    assert len(rows) == len(ex.bins)


def test_exhibit_refuses_small_c():
    with pytest.raises(PreconditionRefused):
        nonuniqueness_exhibit(TREE, RHO_TREE, InitialDatum.constant(1.0), 0.5, [20, 40])


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(-1.0, 1.0))
def test_shift_solution_between_gamma_and_gamma_plus_M(height, gamma):
    u0 = InitialDatum.shells(gamma, [height, height / 2], rhat=2)
    run = run_exhaustion(TREE, RHO_TREE, u0, [6, 12], 0.5, 0.05)
    vals = run.solution_values()
    assert np.min(vals) >= gamma - 1e-9 and np.max(vals) <= gamma + height + 1e-9
