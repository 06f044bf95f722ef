import time

import numpy as np
import pytest

from viscoenergetic import (DoubleWellParams, LoadProfile, Partition, analytic_ve_solution_1d,
                            check_apriori_bounds, check_discrete_energy_identity, check_discrete_stability,
                            convex_quadratic_model, double_well_model, refinement_study, solve_incremental)
from viscoenergetic.scheme import DiscreteTrajectory, InvalidRunError, energy_identity_residuals


def recursion(times):
    u = [0.0]
    for t in times[1:]:
        u.append(max(u[-1], (u[-1] + t - 1.0) / 2.0))
    return np.array(u)


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition([0.0, 0.5, 0.5])
    with pytest.raises(ValueError):
        Partition([0.1, 1.0])
    p = Partition.uniform(2.0, 4)
    assert p.mesh == pytest.approx(0.5) and p.T == 2.0 and p.steps == 4


def test_quadratic_matches_recursion(quad):
    p = Partition.uniform(2.0, 100)
    tr = solve_incremental(quad, p, [0.0])
    assert np.max(np.abs(tr.states[:, 0] - recursion(p.times))) <= 1e-8
    assert tr.states[-1, 0] == pytest.approx(1.0 - 0.0198, abs=0.05)
    assert check_discrete_energy_identity(quad, tr) <= 1e-8


def test_stationary_run_is_exact():
    m = double_well_model(DoubleWellParams(load=LoadProfile.constant(0.0)))
    tr = solve_incremental(m, Partition.uniform(1.0, 20), [-1.0])
    assert np.all(tr.states == -1.0)
    assert check_discrete_energy_identity(m, tr) == 0.0
    rep = check_apriori_bounds(m, tr)
    assert rep.ok and rep.zero_power and rep.energy_nonincreasing


def test_double_well_follows_branch(dw):
    p = DoubleWellParams()
    tr = solve_incremental(dw, Partition.uniform(dw.horizon, 1000), [-1.5])
    t_star = p.onset_time()
    for n in range(0, 1000, 50):
        t = tr.times[n]
        if t < 0.9 * t_star:
            ref = analytic_ve_solution_1d(p, t)
            assert abs(tr.states[n, 0] - ref.u) <= 2e-2
    late = analytic_ve_solution_1d(p, dw.horizon)
    assert tr.states[-1, 0] == pytest.approx(late.u, abs=2e-2)


def test_monotone_records(dw):
    tr = solve_incremental(dw, Partition.uniform(dw.horizon, 400), [-1.5])
    V, W = tr.V_tau, tr.W_tau
    assert np.all(np.diff(V) >= 0) and np.all(np.diff(W) >= 0) and np.all(np.diff(W - V) >= -1e-15)
    U = tr.states
    for n in range(1, U.shape[0]):
        t = tr.times[n]
        assert dw.E(t, U[n]) + dw.D(U[n - 1], U[n]) <= dw.E(t, U[n - 1]) + 1e-12


def test_stability_violation_detected(quad):
    p = Partition.uniform(2.0, 10)
    tr = solve_incremental(quad, p, [0.0])
    bad = DiscreteTrajectory(tr.partition, tr.states.copy(), tr.d_step, tr.delta_step, tr.residual_prev,
                             tr.energy, tr.power_integral, tr.power_error)
    bad.states[-1] = [-2.0]
    good_next = solve_incremental(quad, Partition([0.0, 2.0]), [tr.states[-2, 0]]).states[-1]
    rep = check_discrete_stability(quad, bad, sample_count=10, candidates=[good_next])
    assert not rep.ok and rep.violations[-1][0] == 10
    assert check_discrete_stability(quad, tr, sample_count=1000).ok


def test_single_step_stable_start(quad_frozen):
    tr = solve_incremental(quad_frozen, Partition([0.0, 1.0]), [0.5])
    assert tr.states[1, 0] == 0.5
    assert check_discrete_stability(quad_frozen, tr, 1000).ok


def test_invalid_run_names_step():
    m = double_well_model(DoubleWellParams(box=(-1.6, 0.5)))
    tr = solve_incremental(m, Partition.uniform(m.horizon, 200), [-1.5])
    assert not tr.valid and tr.invalid_step is not None and f"step {tr.invalid_step}" in tr.message
    with pytest.raises(InvalidRunError) as err:
        refinement_study(m, [-1.5], (100, 200))
    assert err.value.step is not None


def test_u0_outside_box(quad):
    with pytest.raises(ValueError):
        solve_incremental(quad, Partition.uniform(1.0, 2), [9.0])


def test_general_load_error_estimate():
    load = LoadProfile(lambda t: np.sin(t), lambda t: np.cos(t))
    m = convex_quadratic_model(load=load)
    tr = solve_incremental(m, Partition.uniform(2.0, 50), [0.0])
    assert np.all(tr.power_error >= 0)
    assert np.max(np.abs(energy_identity_residuals(m, tr))) <= 1e-8


def test_apriori_quadratic(quad):
    tr = solve_incremental(quad, Partition.uniform(2.0, 200), [0.0])
    rep = check_apriori_bounds(quad, tr)
    assert rep.envelope_ok and rep.sum_ok and rep.dissipation_sum < rep.C2


def test_refinement_study_quadratic(quad):
    st = refinement_study(quad, [0.0], (125, 250, 500))
    errs = [np.max(np.abs(e.trajectory.states[:, 0] - np.maximum(0.0, e.trajectory.times - 1.0))) for e in st]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 0.9)
    assert all(a > b for a, b in zip([e.balance_residual for e in st], [e.balance_residual for e in st][1:]))
    with pytest.raises(ValueError):
        refinement_study(quad, [0.0], (250, 125))


def test_threads_do_not_change_results(quad):
    a = refinement_study(quad, [0.0], (50, 100), threads=1)
    b = refinement_study(quad, [0.0], (50, 100), threads=2)
    for x, y in zip(a, b):
        assert np.array_equal(x.trajectory.states, y.trajectory.states)


def test_double_well_identity_and_runtime(dw):
    t0 = time.perf_counter()
    tr = solve_incremental(dw, Partition.uniform(dw.horizon, 1000), [-1.5])
    assert time.perf_counter() - t0 < 10.0
    assert check_discrete_energy_identity(dw, tr) <= 1e-6
