"""Concrete rate-independent systems and their analytic references.

* the 1D double well ``E(t,u) = W(u) - l(t) u`` with ``W(u) = (1-u^2)^2/4``,
  one-sided dissipation and quadratic viscosity, together with the branch
  solution for strong viscosity and the (modified) Maxwell jump rules;
* a convex quadratic energy, where viscous and energetic evolutions agree;
* a two-variable product model whose dissipation only sees ``z``, with its
  marginal (reduced) energy;
* a finite-difference Allen-Cahn energy on (0, 1) with homogeneous Dirichlet
  data (ghost nodes ``u_0 = u_{N+1} = 0``), L1 dissipation and L2 viscosity;

plus the sampling checks for generalized (alpha-Lambda) convexity and the
BV bound it implies for discrete trajectories.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .core import (
    LoadProfile,
    RisModel,
    box_sample,
    calibrate_constants,
    one_sided_dissipation,
    quadratic_viscosity,
)

SQRT3 = math.sqrt(3.0)
#: local maximum of W' on the left branch (u = -1/sqrt 3) and its value
FOLD_U = -1.0 / SQRT3
FOLD_LEVEL = 2.0 / (3.0 * SQRT3)


def W(u):
    u = np.asarray(u, float)
    return 0.25 * (1.0 - u * u) ** 2


def dW(u):
    u = np.asarray(u, float)
    return u ** 3 - u


def d2W(u):
    return 3.0 * np.asarray(u, float) ** 2 - 1.0


class RegimeError(ValueError):
    """Parameters outside the regime an analytic formula is valid in."""


# --------------------------------------------------------------------------
# double well
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DoubleWellParams:
    alpha_plus: float = 1.0
    alpha_minus: float = 1.0
    mu: float = 2.0
    load: LoadProfile | None = None
    u0: float = -1.5
    horizon: float | None = None
    box: tuple[float, float] = (-3.0, 3.0)
    lam: float = 1.0  # -min W''

    def __post_init__(self):
        if self.alpha_plus <= 0 or self.alpha_minus <= 0:
            raise ValueError("alpha_plus and alpha_minus must be positive")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.load is None:
            # u0 sits on the edge of its stable interval at t = 0
            object.__setattr__(self, "load", LoadProfile.linear(float(dW(self.u0)) + self.alpha_plus, 1.0))
        if self.horizon is None:
            rising = self.load.kind == "linear" and (self.load.slope or 0.0) > 0
            object.__setattr__(self, "horizon", 2.0 * self.onset_time() if rising else 1.0)

    @property
    def regime(self) -> str:
        if self.mu == 0:
            return "energetic"
        if self.mu * self.alpha_plus ** 2 >= self.lam:
            return "supercritical"
        return "subcritical"

    def onset_level(self) -> float:
        """Level of l(t) - alpha_+ at which the increasing jump starts."""
        if self.regime == "supercritical":
            return FOLD_LEVEL
        if self.regime == "energetic":
            return energetic_maxwell_jump(self).level
        return modified_maxwell_jump(self).level

    def onset_time(self) -> float:
        load = self.load
        if load.kind != "linear" or not load.slope:
            raise ValueError("onset_time needs an increasing linear load")
        return (self.onset_level() + self.alpha_plus - load.intercept) / load.slope


def double_well_model(params: DoubleWellParams) -> RisModel:
    load = params.load
    ap, am, mu = params.alpha_plus, params.alpha_minus, params.mu

    def energy(t, x):
        u = np.asarray(x, float)[..., 0]
        return 0.25 * (1.0 - u * u) ** 2 - load(t) * u

    def power(t, x):
        return -load.derivative(t) * np.asarray(x, float)[..., 0]

    model = RisModel(
        energy=energy,
        power=power,
        dissipation=one_sided_dissipation(ap, am),
        viscous=quadratic_viscosity(mu),
        base_point=np.array([0.0]),
        search_box=np.array([params.box]),
        horizon=float(params.horizon),
        affine_in_time=load.kind == "linear",
        name="double_well",
        params={"alpha_plus": ap, "alpha_minus": am, "mu": mu, "regime": params.regime},
    )
    return calibrate_constants(model)


@dataclass
class AnalyticPoint:
    t: float
    u: float
    branch: str
    jump: tuple[float, float] | None = None


def _branch_root(level, side):
    """Root of W'(u) = level on the left (u < -1/sqrt3) or right (u > 1/sqrt3) branch."""
    if side == "left":
        if level > FOLD_LEVEL:
            raise RegimeError("left branch does not reach this level")
        lo, hi = -10.0, FOLD_U
    else:
        if level < -FOLD_LEVEL:
            raise RegimeError("right branch does not reach this level")
        lo, hi = -FOLD_U, 10.0
    return optimize.brentq(lambda u: float(dW(u)) - level, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def analytic_ve_solution_1d(params: DoubleWellParams, t: float) -> AnalyticPoint:
    """VE solution for strong viscosity (mu alpha_+^2 >= lambda), increasing load.

    The state follows the upper monotone envelope of W': it stays put while
    ``W'(u0) >= l(t) - alpha_+``, then solves ``W'(u) = l(t) - alpha_+`` on the
    left branch until the fold at ``u = -1/sqrt3`` and continues on the right
    branch afterwards. At the fold time the jump record ``(u-, u+)`` is set.
    """
    if params.regime != "supercritical":
        raise RegimeError("analytic branch solution needs mu * alpha_+^2 >= lambda")
    u0 = params.u0
    if u0 > FOLD_U:
        raise RegimeError("initial datum must lie on the left branch")
    level = float(params.load(t)) - params.alpha_plus
    t_jump = params.onset_time()
    if level < float(dW(u0)):
        return AnalyticPoint(t, u0, "rest")
    if t < t_jump:
        return AnalyticPoint(t, _branch_root(level, "left"), "left")
    u_plus = _branch_root(FOLD_LEVEL, "right")
    if math.isclose(t, t_jump, rel_tol=0.0, abs_tol=1e-14):
        return AnalyticPoint(t, FOLD_U, "left", jump=(FOLD_U, u_plus))
    return AnalyticPoint(t, _branch_root(level, "right"), "right")


@dataclass
class MaxwellJump:
    u_minus: float
    u_plus_first: float
    u_plus_final: float
    level: float
    area_residual: float
    jump_time: float | None = None


def _viscous_area(u_minus, v, level, mu):
    """Integral of W'(r) - level + mu (r - u_minus) over [u_minus, v], by quadrature."""
    val, _ = integrate.quad(lambda r: r ** 3 - r - level + mu * (r - u_minus), u_minus, v,
                            epsabs=1e-14, epsrel=1e-14, limit=200)
    return val


def _far_stationary(u_minus, level, mu):
    # right-most root of W'(v) - level + mu (v - u_minus) = 0 beyond u_minus
    g = lambda v: float(dW(v)) - level + mu * (v - u_minus)
    roots = np.roots([1.0, 0.0, mu - 1.0, -level - mu * u_minus])
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-9 and r.real > u_minus + 1e-9)
    if not real:
        return None
    v0 = real[-1]
    lo, hi = v0 - 1e-3, v0 + 1e-3
    if g(lo) * g(hi) < 0:
        return optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return v0


def modified_maxwell_jump(params: DoubleWellParams, u_minus: float | None = None) -> MaxwellJump:
    """Jump endpoints for moderate viscosity (0 < mu alpha_+^2 < lambda).

    The onset ``u-`` is the left-branch point from which the chord of slope
    ``-mu`` through ``(u-, W'(u-))`` meets the graph of W' again at ``u+``
    with zero signed area between graph and chord, i.e. the viscous
    minimization problem started at ``u-`` has a second global minimizer.
    Found by a root search on ``u-`` with quadrature for the area. With
    ``u_minus`` given, only the landing points for that onset are computed.
    When the equal-area onset would lie beyond the fold of the left branch
    the onset is the fold itself and ``area_residual`` reports the nonzero
    area there.
    """
    if params.regime != "subcritical":
        raise RegimeError("modified Maxwell rule needs 0 < mu * alpha_+^2 < lambda")
    mu = params.mu

    def area_at(u):
        level = float(dW(u))
        v = _far_stationary(u, level, mu)
        if v is None:
            return math.inf
        return _viscous_area(u, v, level, mu)

    if u_minus is None:
        grid = np.linspace(-3.0, FOLD_U - 1e-9, 400)
        vals = np.array([area_at(u) for u in grid])
        sign_change = np.flatnonzero(np.isfinite(vals[:-1]) & np.isfinite(vals[1:])
                                     & (np.sign(vals[:-1]) != np.sign(vals[1:])))
        if sign_change.size:
            i = sign_change[-1]
            u_minus = optimize.brentq(area_at, grid[i], grid[i + 1], xtol=1e-15,
                                      rtol=4 * np.finfo(float).eps)
        else:
            # the equal-area point lies past the fold: the left branch is left at the fold
            u_minus = FOLD_U
    level = float(dW(u_minus))
    final = _branch_root(level, "right")
    v = final if u_minus == FOLD_U else _far_stationary(u_minus, level, mu)
    if v is None:
        raise RegimeError("no landing point for this onset")
    residual = abs(_viscous_area(u_minus, v, level, mu))
    t_jump = None
    if params.load.kind == "linear" and params.load.slope:
        t_jump = (level + params.alpha_plus - params.load.intercept) / params.load.slope
    return MaxwellJump(u_minus, v, final, level, residual, t_jump)


def energetic_maxwell_jump(params: DoubleWellParams) -> MaxwellJump:
    """Classical equal-area jump (mu = 0) between the outer branches of W'."""
    if params.regime != "energetic":
        raise RegimeError("the classical Maxwell rule is the mu = 0 case")

    def area(level):
        a, b = _branch_root(level, "left"), _branch_root(level, "right")
        val, _ = integrate.quad(lambda r: r ** 3 - r - level, a, b, epsabs=1e-14, epsrel=1e-14)
        return val

    level = optimize.brentq(area, -FOLD_LEVEL + 1e-9, FOLD_LEVEL - 1e-9, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    a, b = _branch_root(level, "left"), _branch_root(level, "right")
    t_jump = None
    if params.load.kind == "linear" and params.load.slope:
        t_jump = (level + params.alpha_plus - params.load.intercept) / params.load.slope
    return MaxwellJump(a, b, b, level, abs(area(level)), t_jump)


def predicted_jump(params: DoubleWellParams) -> MaxwellJump:
    """Onset and landing of the increasing jump for any regime of ``mu``."""
    if params.regime == "energetic":
        return energetic_maxwell_jump(params)
    if params.regime == "subcritical":
        return modified_maxwell_jump(params)
    land = _branch_root(FOLD_LEVEL, "right")
    t_jump = None
    if params.load.kind == "linear" and params.load.slope:
        t_jump = (FOLD_LEVEL + params.alpha_plus - params.load.intercept) / params.load.slope
    return MaxwellJump(FOLD_U, land, land, FOLD_LEVEL, 0.0, t_jump)


# --------------------------------------------------------------------------
# convex quadratic and product models
# --------------------------------------------------------------------------

def convex_quadratic_model(a: float = 1.0, load: LoadProfile | None = None, alpha: float = 1.0,
                           mu: float = 1.0, box=(-5.0, 5.0), horizon: float = 2.0,
                           offset: float | None = None) -> RisModel:
    """E(t,u) = a u^2/2 - l(t) u with d = alpha |v - u| and delta = mu |v - u|^2 / 2."""
    if a <= 0:
        raise ValueError("a must be positive")
    load = load or LoadProfile.linear(0.0, 1.0)

    def energy(t, x):
        u = np.asarray(x, float)[..., 0]
        return 0.5 * a * u * u - load(t) * u

    def power(t, x):
        return -load.derivative(t) * np.asarray(x, float)[..., 0]

    model = RisModel(
        energy=energy,
        power=power,
        dissipation=one_sided_dissipation(alpha, alpha),
        viscous=quadratic_viscosity(mu),
        base_point=np.array([0.0]),
        search_box=np.array([box]),
        horizon=horizon,
        affine_in_time=load.kind == "linear",
        name="convex_quadratic",
        params={"a": a, "alpha": alpha, "mu": mu},
    )
    return calibrate_constants(model, offset=offset)


@dataclass(frozen=True)
class MarginalModelParams:
    alpha: float = 1.0
    mu: float = 1.0
    load: LoadProfile = field(default_factory=lambda: LoadProfile.linear(0.0, 1.0))
    box: tuple[float, float] = (-3.0, 3.0)
    horizon: float = 2.0


def marginal_model(params: MarginalModelParams | None = None) -> tuple[RisModel, RisModel]:
    """Full model on (phi, z) with E = (phi-z)^2/2 + z^2/2 - l(t) z, and its reduction.

    Dissipation and viscosity only see ``z``. Minimizing over ``phi`` gives
    ``phi = z`` and the marginal energy ``z^2/2 - l(t) z``.
    """
    p = params or MarginalModelParams()
    load = p.load

    def d_z(x, y):
        inc = np.asarray(y, float)[..., -1] - np.asarray(x, float)[..., -1]
        return p.alpha * np.abs(inc)

    def delta_z(x, y):
        inc = np.asarray(y, float)[..., -1] - np.asarray(x, float)[..., -1]
        return 0.5 * p.mu * inc * inc

    def full_energy(t, x):
        x = np.asarray(x, float)
        phi, z = x[..., 0], x[..., 1]
        return 0.5 * (phi - z) ** 2 + 0.5 * z * z - load(t) * z

    def full_power(t, x):
        return -load.derivative(t) * np.asarray(x, float)[..., 1]

    def reduced_energy(t, x):
        z = np.asarray(x, float)[..., 0]
        return 0.5 * z * z - load(t) * z

    def reduced_power(t, x):
        return -load.derivative(t) * np.asarray(x, float)[..., 0]

    common = dict(horizon=p.horizon, affine_in_time=load.kind == "linear")
    full = RisModel(full_energy, full_power, d_z, delta_z, np.zeros(2),
                    np.array([p.box, p.box]), name="marginal_full",
                    params={"alpha": p.alpha, "mu": p.mu}, **common)
    reduced = RisModel(reduced_energy, reduced_power, d_z, delta_z, np.zeros(1),
                       np.array([p.box]), name="marginal_reduced",
                       params={"alpha": p.alpha, "mu": p.mu}, **common)
    return calibrate_constants(full), calibrate_constants(reduced)


def marginal_minimizer(z) -> np.ndarray:
    """The unique phi minimizing the full energy at fixed z."""
    return np.asarray(z, float)


# --------------------------------------------------------------------------
# Allen-Cahn
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AllenCahnParams:
    nodes: int = 32
    mu: float = 1.0
    alpha: float = 1.0
    load_rate: float = 3.0
    load_shape: Callable | None = None
    box: tuple[float, float] = (-2.0, 2.0)
    horizon: float = 1.0

    def __post_init__(self):
        if not 1 <= self.nodes <= 64:
            raise ValueError("Allen-Cahn discretization supports 1 <= N <= 64 nodes")

    @property
    def h(self) -> float:
        return 1.0 / (self.nodes + 1)

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(1, self.nodes + 1)

    def shape_values(self) -> np.ndarray:
        if self.load_shape is None:
            return np.ones(self.nodes)
        return np.asarray(self.load_shape(self.x), float)


def allen_cahn_model(params: AllenCahnParams | None = None) -> RisModel:
    """Discrete E(t,u) = sum (u_{i+1}-u_i)^2/(2h) + h sum [W(u_i) - l_i(t) u_i].

    Node loads are ``l_i(t) = load_rate * t * shape(x_i)``. The dissipation is
    ``alpha h sum |u_i - v_i|`` and the viscosity ``mu h/2 sum (u_i - v_i)^2``.
    """
    p = params or AllenCahnParams()
    h = p.h
    g = p.shape_values() * p.load_rate

    def energy(t, x):
        u = np.asarray(x, float)
        pad = [(0, 0)] * (u.ndim - 1) + [(1, 1)]
        grad = np.diff(np.pad(u, pad), axis=-1)
        return (np.sum(grad * grad, axis=-1) / (2.0 * h)
                + h * np.sum(0.25 * (1.0 - u * u) ** 2 - t * g * u, axis=-1))

    def power(t, x):
        return -h * np.sum(g * np.asarray(x, float), axis=-1)

    def d(x, y):
        return p.alpha * h * np.sum(np.abs(np.asarray(y, float) - np.asarray(x, float)), axis=-1)

    model = RisModel(
        energy=energy,
        power=power,
        dissipation=d,
        viscous=quadratic_viscosity(p.mu, weight=h),
        base_point=np.zeros(p.nodes),
        search_box=np.tile(np.array(p.box, float), (p.nodes, 1)),
        horizon=p.horizon,
        affine_in_time=True,
        name="allen_cahn",
        params={"nodes": p.nodes, "mu": p.mu, "alpha": p.alpha, "h": h},
    )
    # |P| <= |g|_inf h sum|u| and E + d(0,u) is bounded below by a scan-free
    # estimate: W >= 0 and -t g u >= -T |g|_inf |u|
    gmax = float(np.max(np.abs(g)))
    lo = float(np.max(np.abs(p.box)))
    offset = 1.0 + p.horizon * gmax * lo  # F >= 1 on [0, T] x box
    power_const = 1.25 * gmax * lo
    return model.with_constants(offset=offset, power_const=power_const)


def allen_cahn_gradient(params: AllenCahnParams, t: float, u) -> np.ndarray:
    u = np.asarray(u, float)
    h = params.h
    padded = np.pad(u, (1, 1))
    lap = (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / h
    return -lap + h * (u ** 3 - u - t * params.load_rate * params.shape_values())


def l2_distance(h: float, scale: float = 1.0):
    """d_*(u, v) = sqrt(scale * h * sum (u_i - v_i)^2)."""
    def dstar(x, y):
        inc = np.asarray(y, float) - np.asarray(x, float)
        return np.sqrt(scale * h * np.sum(inc * inc, axis=-1))
    return dstar


def allen_cahn_convexity_constants(params: AllenCahnParams) -> tuple[float, float]:
    """Certified (alpha, Lambda) for the discrete Allen-Cahn energy and the L2 distance.

    The discrete Dirichlet form dominates ``lambda_1 |z|^2`` with
    ``lambda_1 = 4 sin^2(pi h / 2) / h^2`` and ``W'' >= -1``, so the energy is
    uniformly convex along segments with modulus ``lambda_1 - 1`` and
    ``Lambda = 0``. Expressed for ``delta = d_*^2 / 2`` (d_* scaled by sqrt(mu)).
    """
    h = params.h
    lam1 = 4.0 * math.sin(math.pi * h / 2.0) ** 2 / h ** 2
    return (lam1 - 1.0) / params.mu, 0.0


# --------------------------------------------------------------------------
# generalized convexity and BV estimates
# --------------------------------------------------------------------------

@dataclass
class ConvexityEstimate:
    alpha_hat: float
    Lambda_hat: float
    violations: list
    frontier: list


def check_alpha_lambda_convexity(model: RisModel, dstar: Callable, samples: int = 2000,
                                 seed: int = 0, tol: float = 1e-9,
                                 lambdas=None, t: float | None = None) -> ConvexityEstimate:
    """Sample the weak alpha-Lambda convexity inequality along segments.

    For each sample ``(t, x, y, theta)`` on the segment ``(1-theta) x + theta y``
    the convexity gap ``g = [(1-theta)E(x) + theta E(y) - E(gamma)] / (theta (1-theta)/2)``
    must dominate ``alpha d_*^2 - Lambda d d_*``. For every Lambda of a log
    grid the largest admissible alpha is the sampled minimum of
    ``(g + Lambda d d_*) / d_*^2``; the smallest Lambda with a positive alpha
    is reported together with that alpha.
    """
    rng = np.random.default_rng(seed)
    x = box_sample(model.search_box, samples, rng)
    y = box_sample(model.search_box, samples, rng)
    theta = rng.uniform(0.05, 0.95, samples)
    ts = rng.uniform(0.0, model.horizon, samples) if t is None else np.full(samples, t)
    gam = (1.0 - theta)[:, None] * x + theta[:, None] * y
    Ex = np.array([model.E(s, xi) for s, xi in zip(ts, x)])
    Ey = np.array([model.E(s, yi) for s, yi in zip(ts, y)])
    Eg = np.array([model.E(s, gi) for s, gi in zip(ts, gam)])
    gap = ((1.0 - theta) * Ex + theta * Ey - Eg) / (0.5 * theta * (1.0 - theta))
    ds = np.asarray(dstar(x, y), float)
    dd = np.asarray(model.d(x, y), float)
    ok = ds > 1e-12
    gap, ds, dd = gap[ok], ds[ok], dd[ok]
    if lambdas is None:
        lambdas = np.concatenate(([0.0], np.logspace(-3, 4, 71)))
    frontier = []
    for lam in lambdas:
        a = float(np.min((gap + lam * dd * ds - tol) / ds ** 2))
        frontier.append((float(lam), a))
    admissible = [(lam, a) for lam, a in frontier if a > 0]
    lam_hat, alpha_hat = admissible[0] if admissible else frontier[-1]
    margin = gap - (alpha_hat * ds ** 2 - lam_hat * dd * ds)
    violations = [int(i) for i in np.flatnonzero(margin < -tol)]
    return ConvexityEstimate(alpha_hat, lam_hat, violations, frontier)


@dataclass
class BVBoundReport:
    recursion_slack: np.ndarray
    recursion_ok: bool
    gronwall_gamma: float
    dstar_sum: float
    gronwall_bound: float
    gronwall_ok: bool

    @property
    def ok(self) -> bool:
        return self.recursion_ok and self.gronwall_ok


def dstar_bv_bound_check(model: RisModel, dstar: Callable, traj, alpha: float, Lambda: float,
                         L: float, tol: float = 1e-10) -> BVBoundReport:
    """Check the step recursion and the discrete Gronwall sum for d_*.

    With ``a_n = d_*(U^n, U^{n+1})`` and ``b_n = 2 Lambda d(U^n, U^{n+1}) + 2 L tau^{n+1}``
    the recursion reads ``(2 alpha + 1) a_n^2 <= a_{n-1}^2 + b_n a_n``. This is
    the Gronwall hypothesis ``(1 + gamma)^2 a_n^2 <= a_{n-1}^2 + b_n a_n`` for
    ``gamma = sqrt(1 + 2 alpha) - 1``, whence
    ``sum_{n>=1} a_n <= (a_0 + sum b_n) / gamma``. Assumes ``delta = d_*^2 / 2``.
    """
    U = traj.states
    taus = np.diff(traj.times)
    a = np.asarray(dstar(U[:-1], U[1:]), float)
    dsteps = np.asarray(model.d(U[:-1], U[1:]), float)
    b = 2.0 * Lambda * dsteps + 2.0 * L * taus
    lhs = (2.0 * alpha + 1.0) * a[1:] ** 2
    rhs = a[:-1] ** 2 + b[1:] * a[1:]
    slack = rhs - lhs
    gamma = math.sqrt(1.0 + 2.0 * alpha) - 1.0
    total = float(np.sum(a[1:]))
    bound = float((a[0] + np.sum(b[1:])) / gamma) if a.size else 0.0
    return BVBoundReport(slack, bool(np.all(slack >= -tol)), gamma, total, bound,
                         bool(total <= bound + tol))
