"""Viscous-energetic solutions of rate-independent systems.

Incremental minimization with a viscous correction, residual stability,
jump costs from optimal transitions, BV-curve extraction and energy balance
diagnostics, with a double-well, convex, marginal and Allen-Cahn model zoo.
"""
from .core import (EvaluationError, LoadProfile, RisModel, as_state, calibrate_constants,
                   gronwall_envelope, one_sided_dissipation, perturbed_energy, quadratic_viscosity,
                   total_dissipation)
from .optim import (MinimizeConfig, MinimizeResult, batch_minimize_1d, global_minimize_1d,
                    global_minimize_nd, minimize_over_box)
from .stability import (TOL_STABLE, StabilityReport, Yosida, is_quasi_stable, local_stability_check_1d,
                        moreau_yosida, residual, residuals, stability_report)
from .scheme import (AprioriReport, DiscreteTrajectory, InvalidRunError, Partition, RefinementEntry,
                     check_apriori_bounds, check_discrete_energy_identity, check_discrete_stability,
                     energy_identity_residuals, refinement_study, solve_incremental)
from .transitions import (CostBreakdown, JumpCost, Segment, Transition, TransitionConfig,
                          construct_viscous_transition, cost_additivity_check, decompose_transition,
                          energy_drop_bound_check, jump_cost, rescale_transition, transition_cost,
                          transition_residuals, verify_jump_conditions)
from .variation import (BalanceReport, CurveConfig, JumpRecord, RegulatedCurve, additivity_check,
                        augmented_total_variation, curve_from_trajectory, energy_balance_report,
                        extract_limit_curve, pointwise_total_variation)
from .models import (AllenCahnParams, DoubleWellParams, MarginalModelParams, MaxwellJump, RegimeError,
                     allen_cahn_model, analytic_ve_solution_1d, convex_quadratic_model,
                     double_well_model, energetic_maxwell_jump, marginal_model,
                     modified_maxwell_jump, predicted_jump)

__version__ = "0.1.0"
