"""The viscous incremental minimization scheme and its discrete diagnostics.

Given a partition ``0 = t^0 < ... < t^N = T`` and ``U^0``, each step selects

    U^n in argmin_V  E(t^n, V) + D(U^{n-1}, V)

with the lazy tie-break of :func:`viscoenergetic.stability.select_minimizer`.
Every step records the pieces of the discrete energy identity

    E(t^n, U^n) + D(U^{n-1}, U^n) + R(t^n, U^{n-1}) = E(t^{n-1}, U^{n-1}) + int P(s, U^{n-1}) ds.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import RisModel, as_state, gronwall_envelope, perturbed_energy, scan_points
from .optim import MinimizeConfig
from .stability import moreau_yosida


class InvalidRunError(RuntimeError):
    """A run produced a minimizer on the search-box boundary."""

    def __init__(self, message, step=None, run_index=None):
        super().__init__(message)
        self.step = step
        self.run_index = run_index


@dataclass(frozen=True)
class Partition:
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a partition needs at least two times")
        if t[0] != 0.0:
            raise ValueError("a partition starts at t = 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("partition times must increase strictly")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, T: float, N: int) -> "Partition":
        if N < 1 or T <= 0:
            raise ValueError("need N >= 1 and T > 0")
        return cls(np.linspace(0.0, float(T), int(N) + 1))

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.times)))

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> int:
        return self.times.size - 1


@dataclass
class DiscreteTrajectory:
    """States ``U^0..U^n`` and the per-step records (index 0 is step 1)."""

    partition: Partition
    states: np.ndarray
    d_step: np.ndarray
    delta_step: np.ndarray
    residual_prev: np.ndarray
    energy: np.ndarray  # E(t^n, U^n), including n = 0
    power_integral: np.ndarray
    power_error: np.ndarray
    valid: bool = True
    invalid_step: int | None = None
    message: str = ""
    ties: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.partition.times[: self.states.shape[0]]

    @property
    def V_tau(self) -> np.ndarray:
        """Cumulative dissipation, V(t^0) = 0."""
        return np.concatenate(([0.0], np.cumsum(self.d_step)))

    @property
    def W_tau(self) -> np.ndarray:
        """Cumulative dissipation plus viscous and residual contributions."""
        return np.concatenate(([0.0], np.cumsum(self.d_step + self.delta_step + self.residual_prev)))


def _power_integral(model: RisModel, t0: float, t1: float, x) -> tuple[float, float]:
    """Midpoint rule for int_{t0}^{t1} P(s, x) ds, with an error estimate.

    For energies affine in time the power is constant in ``s`` and the rule is
    exact; otherwise the difference with Simpson's rule is the estimate.
    """
    tau = t1 - t0
    mid = tau * float(model.P(0.5 * (t0 + t1), x))
    if model.affine_in_time:
        return mid, 0.0
    simpson = tau / 6.0 * (float(model.P(t0, x)) + 4.0 * mid / tau + float(model.P(t1, x)))
    return mid, abs(simpson - mid)


def solve_incremental(model: RisModel, partition: Partition, U0,
                      config: MinimizeConfig | None = None) -> DiscreteTrajectory:
    """Run the scheme; a boundary minimizer stops the run and marks it invalid."""
    config = config or MinimizeConfig()
    U0 = as_state(U0, model.dim)
    if not model.in_box(U0):
        raise ValueError("U0 lies outside the search box")
    times = partition.times
    N = partition.steps
    states = [U0]
    rec = np.zeros((5, N))
    energy = [float(model.E(0.0, U0))]
    ties = []
    valid, invalid_step, message = True, None, ""
    for n in range(1, N + 1):
        prev = states[-1]
        t = float(times[n])
        y = moreau_yosida(model, t, prev, config)
        U = y.minimal_set[0]
        if y.on_boundary:
            valid, invalid_step = False, n
            message = (f"step {n} (t = {t:.17g}): minimizer {np.array2string(U, precision=6)} "
                       "touches the search box; enlarge the box")
            break
        if len(y.minimal_set) > 1:
            ties.append(n)
        e_prev_now = float(model.E(t, prev))
        rec[0, n - 1] = float(model.d(prev, U))
        rec[1, n - 1] = float(model.delta(prev, U))
        rec[2, n - 1] = max(e_prev_now - y.value, 0.0)
        rec[3, n - 1], rec[4, n - 1] = _power_integral(model, float(times[n - 1]), t, prev)
        states.append(U)
        energy.append(float(model.E(t, U)))
    k = len(states) - 1
    return DiscreteTrajectory(
        partition=partition,
        states=np.array(states),
        d_step=rec[0, :k].copy(),
        delta_step=rec[1, :k].copy(),
        residual_prev=rec[2, :k].copy(),
        energy=np.array(energy),
        power_integral=rec[3, :k].copy(),
        power_error=rec[4, :k].copy(),
        valid=valid,
        invalid_step=invalid_step,
        message=message,
        ties=ties,
    )


@dataclass
class DiscreteStabilityReport:
    violations: list
    checked: int
    min_margin: float

    @property
    def ok(self) -> bool:
        return not self.violations


def check_discrete_stability(model: RisModel, traj: DiscreteTrajectory, sample_count: int = 1000,
                             seed: int = 0, tol: float = 1e-9, candidates=None) -> DiscreteStabilityReport:
    """Test E(t^n,U^n) <= E(t^n,V) + d(U^n,V) + delta(U^{n-1},V) on sampled V.

    The test states are ``sample_count`` uniform points of the box, the same
    number of small perturbations of ``U^n``, ``U^{n-1}`` itself and any
    ``candidates`` supplied by the caller.
    """
    rng = np.random.default_rng(seed)
    box = model.search_box
    lo, hi = box[:, 0], box[:, 1]
    extra = np.asarray(candidates, float).reshape(-1, model.dim) if candidates is not None else None
    violations = []
    min_margin = math.inf
    checked = 0
    times, U = traj.times, traj.states
    for n in range(1, U.shape[0]):
        t = float(times[n])
        V = [lo + (hi - lo) * rng.random((sample_count, model.dim)),
             np.clip(U[n] + 1e-2 * (hi - lo) * rng.standard_normal((sample_count, model.dim)), lo, hi),
             U[n - 1][None, :]]
        if extra is not None:
            V.append(extra)
        V = np.concatenate(V)
        margin = (model.E(t, V) + model.d(U[n], V) + model.delta(U[n - 1], V)) - float(model.E(t, U[n]))
        checked += V.shape[0]
        j = int(np.argmin(margin))
        min_margin = min(min_margin, float(margin[j]))
        if margin[j] < -tol:
            violations.append((n, V[j].copy(), float(margin[j])))
    return DiscreteStabilityReport(violations, checked, min_margin if checked else 0.0)


def energy_identity_residuals(model: RisModel, traj: DiscreteTrajectory) -> np.ndarray:
    """Per-step defect of the discrete energy identity, recomputed from the model."""
    U, times = traj.states, traj.times
    out = np.empty(U.shape[0] - 1)
    for n in range(1, U.shape[0]):
        t0, t1 = float(times[n - 1]), float(times[n])
        pi, _ = _power_integral(model, t0, t1, U[n - 1])
        lhs = float(model.E(t1, U[n])) + float(model.D(U[n - 1], U[n])) + traj.residual_prev[n - 1]
        out[n - 1] = lhs - float(model.E(t0, U[n - 1])) - pi
    return out


def check_discrete_energy_identity(model: RisModel, traj: DiscreteTrajectory) -> float:
    r = energy_identity_residuals(model, traj)
    return float(np.max(np.abs(r))) if r.size else 0.0


@dataclass
class AprioriReport:
    F: np.ndarray
    envelope: np.ndarray
    envelope_ok: bool
    dissipation_sum: float
    C1: float
    C2: float
    sum_ok: bool
    zero_power: bool
    energy_nonincreasing: bool | None

    @property
    def ok(self) -> bool:
        return self.envelope_ok and self.sum_ok and self.energy_nonincreasing is not False


def dissipation_reach(model: RisModel) -> float:
    """C_1 = sup over the box of d(x_o, .), from the box corners and a scan."""
    box = model.search_box
    n = model.dim
    if n <= 16:
        corners = np.array(np.meshgrid(*box, indexing="ij")).reshape(n, -1).T
    else:
        corners = np.stack([box[:, 0], box[:, 1]])
    pts = np.concatenate([corners, scan_points(box, per_axis=33, cap=4096)])
    return float(np.max(model.d(model.base_point, pts)))


def check_apriori_bounds(model: RisModel, traj: DiscreteTrajectory, tol: float = 1e-9) -> AprioriReport:
    """Gronwall envelope for F(t^n, U^n) and the bound on the summed dissipation."""
    U, times = traj.states, traj.times
    F = np.array([perturbed_energy(model, float(t), u) for t, u in zip(times, U)])
    F0 = F[0]
    env = np.array([gronwall_envelope(model, F0, float(t)) for t in times])
    D = traj.d_step + traj.delta_step
    total = float(np.sum(D + traj.residual_prev))
    C1 = dissipation_reach(model)
    C2 = gronwall_envelope(model, F0, float(times[-1])) + C1
    zero_power = bool(np.all(traj.power_integral == 0.0))
    decrease = None
    if zero_power:
        decrease = bool(np.all(np.diff(traj.energy) <= tol))
    scale = max(1.0, float(np.max(np.abs(env))))
    return AprioriReport(F, env, bool(np.all(F <= env + tol * scale)), total, C1, C2,
                         total <= C2 + tol * scale, zero_power, decrease)


@dataclass
class RefinementEntry:
    steps: int
    mesh: float
    trajectory: DiscreteTrajectory
    balance_residual: float
    curve: object = None
    balance: object = None


def refinement_study(model: RisModel, U0, mesh_sequence=(125, 250, 500, 1000, 2000),
                     config: MinimizeConfig | None = None, T: float | None = None,
                     threads: int = 1, curve_config=None) -> list[RefinementEntry]:
    """Solve on a sequence of uniform partitions and evaluate the limit balance.

    ``mesh_sequence`` lists step counts and must make the mesh strictly
    decrease. Each trajectory is turned into a regulated curve (jumps detected
    against the next coarser run) and its energy balance is evaluated.
    """
    from .variation import CurveConfig, curve_from_trajectory, energy_balance_report

    Ns = [int(N) for N in mesh_sequence]
    if len(Ns) < 1 or any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("mesh_sequence must list strictly increasing step counts")
    T = float(model.horizon if T is None else T)
    parts = [Partition.uniform(T, N) for N in Ns]

    def run(p):
        return solve_incremental(model, p, U0, config)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajs = list(pool.map(run, parts))
    else:
        trajs = [run(p) for p in parts]
    for i, tr in enumerate(trajs):
        if not tr.valid:
            raise InvalidRunError(f"run {i} (N = {Ns[i]}): {tr.message}", tr.invalid_step, i)
    cc = curve_config or CurveConfig()
    out = []
    for i, (N, p, tr) in enumerate(zip(Ns, parts, trajs)):
        ref = trajs[i - 1] if i > 0 else None
        curve = curve_from_trajectory(model, tr, ref, cc, config)
        bal = energy_balance_report(model, curve, cc)
        out.append(RefinementEntry(N, p.mesh, tr, bal.max_residual, curve, bal))
    return out
