import math

import numpy as np
import pytest
from scipy import integrate, optimize

from viscoenergetic import (AllenCahnParams, DoubleWellParams, LoadProfile, MarginalModelParams, Partition,
                            RegimeError, allen_cahn_model, analytic_ve_solution_1d, check_discrete_energy_identity,
                            convex_quadratic_model, double_well_model, energetic_maxwell_jump, marginal_model,
                            modified_maxwell_jump, predicted_jump, residuals, solve_incremental)
from viscoenergetic.models import (FOLD_LEVEL, FOLD_U, W, allen_cahn_convexity_constants, allen_cahn_gradient,
                                   check_alpha_lambda_convexity, dstar_bv_bound_check, dW, l2_distance,
                                   marginal_minimizer)
from viscoenergetic.optim import MinimizeConfig


def test_double_well_values():
    m = double_well_model(DoubleWellParams(load=LoadProfile.constant(0.0)))
    assert m.E(0.0, [0.0]) == 0.25
    assert float(dW(-1 / math.sqrt(3))) == pytest.approx(2 / (3 * math.sqrt(3)), abs=1e-15)
    assert FOLD_LEVEL == pytest.approx(0.3849, abs=1e-4)
    m2 = double_well_model(DoubleWellParams(load=LoadProfile.linear(0.3, 2.5)))
    assert m2.P(1.0, [0.7]) == pytest.approx(-2.5 * 0.7)


def test_regimes():
    assert DoubleWellParams(mu=2.0).regime == "supercritical"
    assert DoubleWellParams(mu=1.0).regime == "supercritical"
    assert DoubleWellParams(mu=0.5).regime == "subcritical"
    assert DoubleWellParams(mu=0.0).regime == "energetic"
    with pytest.raises(ValueError):
        DoubleWellParams(alpha_plus=0.0)


def test_default_start_is_stable():
    p = DoubleWellParams()
    m = double_well_model(p)
    assert residuals(m, 0.0, [[p.u0]])[0] <= 1e-12


def test_analytic_solution():
    p = DoubleWellParams()
    t_star = p.onset_time()
    on = analytic_ve_solution_1d(p, t_star)
    assert on.u == pytest.approx(-1 / math.sqrt(3), abs=1e-9)
    after = analytic_ve_solution_1d(p, t_star + 1e-9)
    assert after.u == pytest.approx(2 / math.sqrt(3), abs=1e-6)
    before = analytic_ve_solution_1d(p, 0.5 * t_star)
    assert float(dW(before.u)) == pytest.approx(p.load(0.5 * t_star) - p.alpha_plus, abs=1e-12)
    with pytest.raises(RegimeError):
        analytic_ve_solution_1d(DoubleWellParams(mu=1 / 3), 1.0)


def test_modified_maxwell_third():
    p = DoubleWellParams(mu=1 / 3)
    j = modified_maxwell_jump(p)
    a = math.sqrt(2 / 3)  # chord slope a^2 - 1 = -mu
    assert j.u_minus == pytest.approx(-a, abs=1e-10)
    assert j.u_plus_first == pytest.approx(a, abs=1e-10)
    assert j.u_plus_final == pytest.approx(1.1153, abs=1e-4)
    assert j.area_residual <= 1e-10
    final = optimize.brentq(lambda u: u ** 3 - u - float(dW(-a)), 1.0, 2.0, xtol=1e-15)
    assert j.u_plus_final == pytest.approx(final, abs=1e-12)


@pytest.mark.parametrize("mu", [0.1, 0.25, 0.5, 0.6, 0.66])
def test_modified_maxwell_onset_curve(mu):
    j = modified_maxwell_jump(DoubleWellParams(mu=mu))
    assert j.u_minus == pytest.approx(-math.sqrt(1 - mu), abs=1e-9)
    area, _ = integrate.quad(lambda r: float(dW(r)) - float(dW(j.u_minus)) + mu * (r - j.u_minus),
                             j.u_minus, j.u_plus_first, epsabs=1e-13)
    assert abs(area) <= 1e-10


@pytest.mark.parametrize("mu", [0.7, 0.75, 0.9])
def test_modified_maxwell_onset_at_fold(mu):
    # the equal-area point -sqrt(1 - mu) lies beyond the fold, which is reached first
    j = modified_maxwell_jump(DoubleWellParams(mu=mu))
    assert -math.sqrt(1 - mu) > FOLD_U
    assert j.u_minus == FOLD_U and j.level == FOLD_LEVEL
    assert j.u_plus_final == pytest.approx(2 / math.sqrt(3), abs=1e-12)


def test_modified_maxwell_regime_error():
    with pytest.raises(RegimeError):
        modified_maxwell_jump(DoubleWellParams(mu=2.0))


def test_energetic_maxwell():
    j = energetic_maxwell_jump(DoubleWellParams(mu=0.0))
    assert (j.u_minus, j.u_plus_final) == pytest.approx((-1.0, 1.0), abs=1e-9)
    assert j.area_residual <= 1e-10
    # the convex envelope of W is flat exactly on [-1, 1]
    env = lambda u: np.where(np.abs(u) >= 1, W(u), 0.0)
    assert float(env(np.array(j.u_minus))) == pytest.approx(0.0, abs=1e-12)


def test_predicted_jump_supercritical():
    j = predicted_jump(DoubleWellParams(mu=2.0))
    assert j.u_minus == FOLD_U and j.u_plus_final == pytest.approx(2 / math.sqrt(3), abs=1e-12)


def test_convex_stable_set():
    m = convex_quadratic_model()
    t = 1.3
    assert residuals(m, t, [[t - 1.0]])[0] == 0.0
    assert residuals(m, t, [[t - 1.1]])[0] > 1e-4
    xs = np.linspace(t - 2, t + 2, 100)[:, None]
    R = residuals(m, t, xs)
    assert np.array_equal(R <= 1e-7, np.abs(xs[:, 0] - t) <= 1.0 + 1e-12)


def test_marginal_reduction():
    full, reduced = marginal_model()
    rng = np.random.default_rng(2)
    for z, phi, t in rng.uniform(-2, 2, (200, 3)):
        assert reduced.E(t, [z]) <= full.E(t, [phi, z]) + 1e-15
        assert reduced.E(t, [z]) == pytest.approx(full.E(t, [float(marginal_minimizer(z)), z]), abs=1e-15)
    assert full.d([0.0, 0.0], [5.0, 1.0]) == 1.0


def test_marginal_full_matches_reduced():
    full, reduced = marginal_model(MarginalModelParams())
    p = Partition.uniform(2.0, 200)
    a = solve_incremental(full, p, [0.0, 0.0])
    b = solve_incremental(reduced, p, [0.0])
    assert np.max(np.abs(a.states[:, 1] - b.states[:, 0])) <= 1e-6


def test_allen_cahn_energy_and_gradient():
    p = AllenCahnParams(nodes=16)
    m = allen_cahn_model(AllenCahnParams(nodes=16, load_rate=0.0))
    assert m.E(0.0, np.zeros(16)) == pytest.approx(0.25 * 16 * p.h)
    rng = np.random.default_rng(4)
    for _ in range(5):
        u, t, eps = rng.uniform(-1.5, 1.5, 16), rng.uniform(0, 1), 1e-6
        g = allen_cahn_gradient(p, t, u)
        fd = np.array([(allen_cahn_model(p).E(t, u + eps * e) - allen_cahn_model(p).E(t, u - eps * e)) / (2 * eps)
                       for e in np.eye(16)])
        assert np.max(np.abs(g - fd)) <= 1e-6
    with pytest.raises(ValueError):
        AllenCahnParams(nodes=65)


def test_allen_cahn_short_run_identity():
    m = allen_cahn_model(AllenCahnParams())
    tr = solve_incremental(m, Partition.uniform(0.05, 10), np.zeros(32), MinimizeConfig(multistart=0))
    assert check_discrete_energy_identity(m, tr) <= 1e-5


def test_convexity_quadratic():
    m = convex_quadratic_model(a=2.0)
    est = check_alpha_lambda_convexity(m, l2_distance(1.0), samples=500)
    assert est.alpha_hat == pytest.approx(2.0, rel=1e-2) and est.Lambda_hat == 0.0 and not est.violations


def test_convexity_double_well_needs_lambda():
    m = double_well_model(DoubleWellParams(mu=1.0, box=(-1.5, 1.5)))
    est = check_alpha_lambda_convexity(m, lambda x, y: m.d(x, y), samples=1000)
    # W is only (-1)-convex: Lambda > 0 is required for a positive alpha
    assert est.frontier[0][1] < 0 and est.Lambda_hat > 0 and est.alpha_hat > 0 and not est.violations


def test_convexity_allen_cahn_certified_constants():
    p = AllenCahnParams(nodes=16)
    m = allen_cahn_model(p)
    alpha, lam = allen_cahn_convexity_constants(p)
    est = check_alpha_lambda_convexity(m, l2_distance(p.h, p.mu), samples=500, lambdas=[lam])
    assert est.frontier[0][1] >= alpha * (1 - 1e-6)


def test_bv_bound_quadratic_and_stationary():
    m = convex_quadratic_model()
    tr = solve_incremental(m, Partition.uniform(2.0, 100), [0.0])
    rep = dstar_bv_bound_check(m, lambda x, y: m.d(x, y), tr, alpha=0.5, Lambda=0.0, L=1.0)
    assert rep.recursion_ok and rep.gronwall_ok
    still = solve_incremental(double_well_model(DoubleWellParams(load=LoadProfile.constant(0.0))),
                              Partition.uniform(1.0, 10), [-1.0])
    rep = dstar_bv_bound_check(m, lambda x, y: m.d(x, y), still, 0.5, 0.0, 0.0)
    assert np.all(rep.recursion_slack == 0.0) and rep.dstar_sum == 0.0
