"""Curves of bounded variation with explicit jumps.

A :class:`RegulatedCurve` is piecewise constant between its sample times and
carries jump records ``(t, u_minus, u_mid, u_plus)``. Between knots it is
left-continuous, except right after a jump where it holds ``u_plus``.

Variations are sums along the ordered list of states a curve visits on an
interval. The pointwise variation charges ``d`` on every move; the augmented
one charges the jump costs ``c(t, u_minus, u_mid)`` and ``c(t, u_mid, u_plus)``
on the two halves of each jump instead. At an endpoint only the half of a
jump lying inside the interval counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RisModel
from .optim import MinimizeConfig
from .scheme import DiscreteTrajectory, _power_integral
from .stability import TOL_STABLE, residuals
from .transitions import TransitionConfig, jump_cost


@dataclass
class JumpRecord:
    t: float
    u_minus: np.ndarray
    u_mid: np.ndarray
    u_plus: np.ndarray
    cost_minus: float | None = None
    cost_plus: float | None = None
    node: int | None = None
    cluster: tuple | None = None

    def __post_init__(self):
        self.u_minus = np.atleast_1d(np.asarray(self.u_minus, float))
        self.u_mid = np.atleast_1d(np.asarray(self.u_mid, float))
        self.u_plus = np.atleast_1d(np.asarray(self.u_plus, float))


@dataclass
class RegulatedCurve:
    sample_times: np.ndarray
    sample_states: np.ndarray
    jumps: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        t = np.asarray(self.sample_times, float).ravel()
        s = np.asarray(self.sample_states, float)
        if s.ndim == 1:
            s = s[:, None]
        if t.size != s.shape[0] or t.size == 0:
            raise ValueError("sample_times and sample_states must match and be nonempty")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must increase strictly")
        jt = [j.t for j in self.jumps]
        if any(b <= a for a, b in zip(jt, jt[1:])):
            raise ValueError("jump times must increase strictly")
        if self.jumps and (jt[0] < t[0] or jt[-1] > t[-1]):
            raise ValueError("jump times must lie inside the sampled interval")
        self.sample_times, self.sample_states = t, s
        self._build()

    def _build(self):
        jt = {j.t: j for j in self.jumps}
        knots = [(float(t), None, s) for t, s in zip(self.sample_times, self.sample_states)
                 if float(t) not in jt]
        knots += [(j.t, j, None) for j in self.jumps]
        knots.sort(key=lambda k: k[0])
        self._times = np.array([k[0] for k in knots])
        self._jump = [k[1] for k in knots]
        self._entry = [k[2] if k[1] is None else k[1].u_minus for k in knots]
        self._mid = [k[2] if k[1] is None else k[1].u_mid for k in knots]
        self._exit = [k[2] if k[1] is None else k[1].u_plus for k in knots]

    @property
    def t0(self) -> float:
        return float(self.sample_times[0])

    @property
    def T(self) -> float:
        return float(self.sample_times[-1])

    def _interval_value(self, k: int):
        """Value held on the open interval just before knot ``k``."""
        if k == 0:
            return self._entry[0]
        if k >= len(self._times):
            return self._exit[-1]
        if self._jump[k - 1] is not None:
            return self._exit[k - 1]
        return self._entry[k]

    def _knot_at(self, t: float):
        k = int(np.searchsorted(self._times, t))
        if k < len(self._times) and self._times[k] == t:
            return k, True
        return k, False

    def value(self, t: float) -> np.ndarray:
        k, at = self._knot_at(float(t))
        return self._mid[k] if at else self._interval_value(k)

    def path(self, a: float, b: float):
        """States visited on [a, b] and the kind of each move ('d', 'cm', 'cp').

        Returns ``(states, kinds, jumps)`` where ``kinds[i]`` labels the move
        into ``states[i + 1]`` and ``jumps[i]`` is the jump record for jump
        halves (else ``None``).
        """
        if b < a:
            raise ValueError("need a <= b")
        states, kinds, jrefs = [], [], []

        def add(x, kind="d", j=None):
            if states:
                kinds.append(kind)
                jrefs.append(j)
            states.append(x)

        ka, at_a = self._knot_at(float(a))
        if at_a:
            add(self._mid[ka])
            if self._jump[ka] is not None and b > a:
                add(self._exit[ka], "cp", self._jump[ka])
            start = ka + 1
        else:
            add(self._interval_value(ka))
            start = ka
        if b == a:
            return states, kinds, jrefs
        kb, at_b = self._knot_at(float(b))
        for k in range(start, kb):
            add(self._interval_value(k))
            j = self._jump[k]
            if j is None:
                add(self._entry[k])
            else:
                add(j.u_minus)
                add(j.u_mid, "cm", j)
                add(j.u_plus, "cp", j)
        add(self._interval_value(kb))
        if at_b:
            j = self._jump[kb]
            if j is None:
                add(self._entry[kb])
            else:
                add(j.u_minus)
                add(j.u_mid, "cm", j)
        return states, kinds, jrefs

    def pieces(self, a: float, b: float):
        """Constant pieces ``(s0, s1, value)`` covering [a, b]."""
        out = []
        cuts = [float(a)] + [float(t) for t in self._times if a < t < b] + [float(b)]
        for s0, s1 in zip(cuts[:-1], cuts[1:]):
            if s1 > s0:
                out.append((s0, s1, self.value(0.5 * (s0 + s1))))
        return out


def _variation(model: RisModel, curve: RegulatedCurve, interval, augmented: bool) -> float:
    a, b = float(interval[0]), float(interval[1])
    states, kinds, jrefs = curve.path(a, b)
    if len(states) < 2:
        return 0.0
    X = np.array(states[:-1])
    Y = np.array(states[1:])
    dvals = np.atleast_1d(model.d(X, Y)).astype(float)
    if augmented:
        for i, (kind, j) in enumerate(zip(kinds, jrefs)):
            if kind == "d":
                continue
            c = j.cost_minus if kind == "cm" else j.cost_plus
            if c is None:
                raise ValueError(f"jump at t = {j.t} has no cost for its {kind} half")
            dvals[i] = c
    return math.fsum(dvals)


def pointwise_total_variation(model: RisModel, curve: RegulatedCurve, interval) -> float:
    """Sum of d along the states the curve visits on ``interval``."""
    return _variation(model, curve, interval, augmented=False)


def augmented_total_variation(model: RisModel, curve: RegulatedCurve, interval, config=None) -> float:
    """Pointwise variation with each jump half charged by its jump cost."""
    return _variation(model, curve, interval, augmented=True)


def additivity_check(model: RisModel, curve: RegulatedCurve, a: float, b: float, c_: float,
                     tol: float = 1e-10, augmented: bool = True) -> bool:
    if not a <= b <= c_:
        raise ValueError("need a <= b <= c")
    f = augmented_total_variation if augmented else pointwise_total_variation
    left = f(model, curve, (a, b))
    right = f(model, curve, (b, c_))
    whole = f(model, curve, (a, c_))
    return abs(left + right - whole) <= tol * max(1.0, abs(whole))


def curve_power_integral(model: RisModel, curve: RegulatedCurve, a: float, b: float) -> float:
    """int_a^b P(s, u(s)) ds over the constant pieces (midpoint rule per piece)."""
    return math.fsum(_power_integral(model, s0, s1, v)[0] for s0, s1, v in curve.pieces(a, b))


# --------------------------------------------------------------------------
# jump extraction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CurveConfig:
    threshold_factor: float = 10.0
    persistence_factor: float = 2.0
    #: unflagged steps allowed inside one cluster of large steps
    merge_gap: int = 2
    #: extra trajectory states on each side scanned for the one-sided limits
    window: int = 3
    scan_points: int = 257
    time_bisections: int = 30
    checkpoints: int = 17
    tol_stable: float = TOL_STABLE
    transitions: TransitionConfig = field(default_factory=TransitionConfig)


def detect_clusters(traj: DiscreteTrajectory, cfg: CurveConfig | None = None) -> list[tuple[int, int]]:
    """Runs of steps with d_step above ``threshold_factor`` x median nonzero step.

    Returns inclusive step ranges ``(a, b)`` (step n moves U^{n-1} to U^n).
    """
    cfg = cfg or CurveConfig()
    d = traj.d_step
    nz = d[d > 0]
    if nz.size == 0:
        return []
    flagged = np.flatnonzero(d > cfg.threshold_factor * np.median(nz)) + 1
    clusters = []
    for n in flagged:
        if clusters and n - clusters[-1][1] <= cfg.merge_gap + 1:
            clusters[-1][1] = int(n)
        else:
            clusters.append([int(n), int(n)])
    return [tuple(c) for c in clusters]


def _cluster_size(model, traj, c):
    return float(model.d(traj.states[c[0] - 1], traj.states[c[1]]))


def _persistent(model, traj, c, ref, ref_clusters, factor):
    size = _cluster_size(model, traj, c)
    t0, t1 = traj.times[c[0] - 1], traj.times[c[1]]
    slack = 2.0 * ref.partition.mesh
    for rc in ref_clusters:
        r0, r1 = ref.times[rc[0] - 1], ref.times[rc[1]]
        if r0 - slack <= t1 and t0 <= r1 + slack:
            rs = _cluster_size(model, ref, rc)
            if size <= factor * rs and rs <= factor * size:
                return True
    return False


def _polyline(states, points):
    """``points`` samples along the polyline through ``states`` (by segment index)."""
    states = np.asarray(states, float)
    L = states.shape[0] - 1
    if L == 0:
        return np.zeros(1), states.copy()
    s = np.linspace(0.0, L, points)

    return s, _poly_at(states, s)


def _poly_at(states, s):
    L = states.shape[0] - 1
    s = np.clip(np.asarray(s, float), 0.0, L)
    i = np.minimum(np.floor(s).astype(int), L - 1)
    w = (s - i)[:, None]
    return (1.0 - w) * states[i] + w * states[i + 1]


def _innermost_stable(model, t, states, toward_end: bool, cfg: CurveConfig, config):
    """The one-sided limit of a jump, read off the states near it.

    Along the polyline through ``states`` (ordered in time) pick the D-stable
    point closest to the jump (the end of the polyline when ``toward_end``,
    else its start); when no point is stable at ``t``, the least unstable one.
    """
    states = np.asarray(states, float)
    if states.shape[0] == 1:
        return states[0]
    s, pts = _polyline(states, cfg.scan_points)
    R = residuals(model, t, pts, config)
    stable = np.flatnonzero(R <= cfg.tol_stable)
    if stable.size:
        k = int(stable[-1] if toward_end else stable[0])
        nb = k + 1 if toward_end else k - 1
        if 0 <= nb < s.size:
            # bisect the stability edge between the stable sample and its neighbour
            lo_s, hi_s = s[k], s[nb]
            for _ in range(40):
                mid = 0.5 * (lo_s + hi_s)
                if residuals(model, t, _poly_at(states, [mid]), config)[0] <= cfg.tol_stable:
                    lo_s = mid
                else:
                    hi_s = mid
            return _poly_at(states, [lo_s])[0]
        return pts[k]
    # nothing stable: zoom on the minimum of R
    k = int(np.argmin(R))
    a, b = s[max(k - 1, 0)], s[min(k + 1, s.size - 1)]
    best_s, best_r = s[k], R[k]
    for _ in range(6):
        ss = np.linspace(a, b, 17)
        rr = residuals(model, t, _poly_at(states, ss), config)
        j = int(np.argmin(rr))
        if rr[j] < best_r:
            best_s, best_r = ss[j], rr[j]
        a, b = ss[max(j - 1, 0)], ss[min(j + 1, ss.size - 1)]
    return _poly_at(states, [best_s])[0]


def _min_residual(model, t, states, cfg: CurveConfig, config) -> float:
    """Smallest R(t, .) along the polyline through ``states``, zoomed near its minimum."""
    states = np.asarray(states, float)
    s, pts = _polyline(states, cfg.scan_points)
    R = residuals(model, t, pts, config)
    k = int(np.argmin(R))
    best = float(R[k])
    if best <= cfg.tol_stable or s.size == 1:
        return best
    a, b = s[max(k - 1, 0)], s[min(k + 1, s.size - 1)]
    for _ in range(4):
        ss = np.linspace(a, b, 17)
        rr = residuals(model, t, _poly_at(states, ss), config)
        j = int(np.argmin(rr))
        best = min(best, float(rr[j]))
        if best <= cfg.tol_stable:
            break
        a, b = ss[max(j - 1, 0)], ss[min(j + 1, ss.size - 1)]
    return best


def _stability_loss_time(model, pre, t_lo: float, t_hi: float, cfg: CurveConfig, config) -> float:
    """Last time in [t_lo, t_hi] at which the polyline ``pre`` still holds a stable state.

    This locates the jump of the limit curve: the discrete states keep
    creeping for a while after their branch has lost stability, so the
    largest discrete step lags the jump by a mesh-dependent delay.
    """
    def holds(t):
        return _min_residual(model, t, pre, cfg, config) <= cfg.tol_stable

    if holds(t_hi) or not holds(t_lo):
        return t_hi
    for _ in range(cfg.time_bisections):
        mid = 0.5 * (t_lo + t_hi)
        if holds(mid):
            t_lo = mid
        else:
            t_hi = mid
    return t_lo


def curve_from_trajectory(model: RisModel, traj: DiscreteTrajectory, reference: DiscreteTrajectory | None = None,
                          cfg: CurveConfig | None = None, config: MinimizeConfig | None = None) -> RegulatedCurve:
    """Regulated curve of one trajectory with its large-step clusters collapsed into jumps.

    A cluster of large steps becomes a jump when a coarser ``reference`` run shows a cluster of comparable size
    (within ``persistence_factor``) nearby; otherwise it is kept as ordinary
    samples and a warning is recorded. The jump time is the last time at which
    the states before the cluster still contain a stable one. The one-sided limits are the stable
    states closest to the jump on either side (see :func:`_innermost_stable`);
    the curve is left-continuous at the jump, ``u_mid = u_minus``.
    """
    cfg = cfg or CurveConfig()
    warns = []
    clusters = detect_clusters(traj, cfg)
    ref_clusters = detect_clusters(reference, cfg) if reference is not None else None
    if reference is None and clusters:
        warns.append("no coarser run: jump persistence not checked")
    times, U = traj.times, traj.states
    N = U.shape[0] - 1
    keep = np.ones(N + 1, bool)
    jumps = []
    for c in clusters:
        if ref_clusters is not None and not _persistent(model, traj, c, reference, ref_clusters,
                                                        cfg.persistence_factor):
            warns.append(f"unresolved large steps {c[0]}..{c[1]} (t = {times[c[0]]:.6g}): "
                         "not persistent under refinement")
            continue
        a, b = c
        p = a + int(np.argmax(traj.d_step[a - 1:b]))
        # widen the window backward until it starts from a stable state
        floor = jumps[-1].cluster[1] if jumps else 0
        width = cfg.window
        lo = max(a - 1 - width, floor)
        while lo > floor and _min_residual(model, float(times[lo]), U[lo:p], cfg, config) > cfg.tol_stable:
            width *= 2
            lo = max(a - 1 - width, floor)
        pre = U[lo:p]
        post = U[p:min(b + cfg.window, N) + 1]
        tJ = _stability_loss_time(model, pre, float(times[lo]), float(times[p]), cfg, config)
        um = _innermost_stable(model, tJ, pre, True, cfg, config)
        up = _innermost_stable(model, tJ, post, False, cfg, config)
        keep[(times > tJ) & (np.arange(N + 1) <= b)] = False
        jumps.append(JumpRecord(tJ, um, um.copy(), up, node=p, cluster=(a, b)))
    for j in jumps:
        j.cost_minus = 0.0
        j.cost_plus = jump_cost(model, j.t, j.u_mid, j.u_plus, config, cfg.transitions).cost
    jt = {j.t for j in jumps}
    keep &= np.array([float(t) not in jt for t in times])
    return RegulatedCurve(times[keep], U[keep], jumps, warns)


def extract_limit_curve(model: RisModel, refinement_output, cfg: CurveConfig | None = None,
                        config: MinimizeConfig | None = None) -> RegulatedCurve:
    """Regulated curve of the finest run, with jumps confirmed by the next coarser one."""
    if len(refinement_output) < 3:
        raise ValueError("extract_limit_curve needs a refinement study with at least 3 meshes")
    runs = sorted(refinement_output, key=lambda e: e.mesh)
    return curve_from_trajectory(model, runs[0].trajectory, runs[1].trajectory, cfg, config)


# --------------------------------------------------------------------------
# energy balance
# --------------------------------------------------------------------------

@dataclass
class BalanceReport:
    checkpoints: np.ndarray
    defects: np.ndarray  # E(t,u) + Var_{d,c}(0,t) - E(0,u(0)) - int P, signed

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.defects))) if self.defects.size else 0.0

    def chain_rule_ok(self, tol: float = 1e-9) -> bool:
        """The defect never drops below -tol (the balance holds as an inequality).

        Exact for curves that are stable at every non-jump time; a discrete
        interpolant lags its stable branch and needs ``tol`` of order the mesh.
        """
        return bool(np.all(self.defects >= -tol))


def balance_checkpoints(curve: RegulatedCurve, count: int = 17, mesh: float | None = None) -> np.ndarray:
    t0, T = curve.t0, curve.T
    pts = list(np.linspace(t0, T, count))
    if mesh is None:
        mesh = float(np.max(np.diff(curve.sample_times))) if curve.sample_times.size > 1 else 0.0
    for j in curve.jumps:
        pts += [j.t - mesh, j.t + mesh]
    return np.unique(np.clip(pts, t0, T))


def energy_balance_report(model: RisModel, curve: RegulatedCurve, cfg: CurveConfig | None = None,
                          checkpoints=None) -> BalanceReport:
    """Signed defect of the energy balance at checkpoints along the curve."""
    cfg = cfg or CurveConfig()
    if checkpoints is None:
        checkpoints = balance_checkpoints(curve, cfg.checkpoints)
    checkpoints = np.asarray(checkpoints, float)
    t0 = curve.t0
    e0 = float(model.E(t0, curve.value(t0)))
    pieces = curve.pieces(t0, curve.T)
    starts = np.array([p[0] for p in pieces])
    ends = np.array([p[1] for p in pieces])
    cum = np.concatenate(([0.0], np.cumsum([_power_integral(model, s0, s1, v)[0] for s0, s1, v in pieces])))
    out = []
    for t in checkpoints:
        k = int(np.searchsorted(ends, t, side="left"))
        work = cum[k]
        if k < len(pieces) and starts[k] < t:
            work += _power_integral(model, starts[k], float(t), pieces[k][2])[0]
        var = augmented_total_variation(model, curve, (t0, float(t)))
        out.append(float(model.E(float(t), curve.value(t))) + var - e0 - work)
    return BalanceReport(checkpoints, np.array(out))
