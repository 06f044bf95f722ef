"""Jump transitions at frozen time and their costs.

A transition is a finite, strictly increasing parameter set ``s_0 < ... < s_K``
with states ``theta_j``. Its cost splits into three sums over consecutive
pairs and points::

    var_part      = sum_j d(theta_{j-1}, theta_j)
    gap_part      = sum_j delta(theta_{j-1}, theta_j)
    residual_part = sum_{j<K} R(t, theta_j)

Every consecutive gap of a finite set counts as a hole, so the viscous
correction is charged on every pair. Continuous (sliding) pieces only appear
as refinement limits: a finely sampled stable segment has vanishing gap sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import RisModel, as_state
from .optim import MinimizeConfig
from .stability import TOL_STABLE, moreau_yosida, residuals


@dataclass(frozen=True)
class TransitionConfig:
    tol_stable: float = TOL_STABLE
    tol_x: float = 1e-10
    max_iter: int = 5000
    #: lengths of the short sliding step tried before iterating M from a stable state
    eps_list: tuple = (3e-2, 1e-2, 3e-3, 1e-3)
    gap_tol: float = 1e-4
    max_samples: int = 2048
    lattice_points: int = 121
    lattice_K: int = 6
    slide_fraction: float = 1e-2


@dataclass
class Transition:
    params: np.ndarray
    states: np.ndarray
    time: float
    kinds: tuple | None = None
    converged: bool | None = None
    tail_bound: float = 0.0
    residual_cache: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        p = np.asarray(self.params, float).ravel()
        s = np.asarray(self.states, float)
        if s.ndim == 1:
            s = s[:, None]
        if p.size == 0 or p.size != s.shape[0]:
            raise ValueError("params and states must be nonempty and of equal length")
        if np.any(np.diff(p) <= 0):
            raise ValueError("transition parameters must increase strictly")
        self.params, self.states = p, s

    @property
    def K(self) -> int:
        return self.params.size - 1

    @property
    def u_minus(self) -> np.ndarray:
        return self.states[0]

    @property
    def u_plus(self) -> np.ndarray:
        return self.states[-1]

    def sub(self, i: int, j: int) -> "Transition":
        """The restriction to indices ``i..j`` inclusive."""
        cache = None if self.residual_cache is None else self.residual_cache[i:j + 1]
        kinds = None if self.kinds is None else self.kinds[i:j + 1]
        return Transition(self.params[i:j + 1], self.states[i:j + 1], self.time, kinds,
                          residual_cache=cache)


@dataclass(frozen=True)
class CostBreakdown:
    var_part: float
    gap_part: float
    residual_part: float

    @property
    def total(self) -> float:
        return self.var_part + self.gap_part + self.residual_part


def transition_residuals(model: RisModel, tr: Transition, config: MinimizeConfig | None = None) -> np.ndarray:
    """R(t, theta_j) at every point, cached on the transition."""
    if tr.residual_cache is None or tr.residual_cache.size != tr.params.size:
        tr.residual_cache = residuals(model, tr.time, tr.states, config)
    return tr.residual_cache


def transition_cost(model: RisModel, tr: Transition, config: MinimizeConfig | None = None) -> CostBreakdown:
    if tr.K == 0:
        return CostBreakdown(0.0, 0.0, 0.0)
    a, b = tr.states[:-1], tr.states[1:]
    R = transition_residuals(model, tr, config)
    return CostBreakdown(math.fsum(np.atleast_1d(model.d(a, b))),
                         math.fsum(np.atleast_1d(model.delta(a, b))),
                         math.fsum(R[:-1]))


def cost_additivity_check(model: RisModel, tr: Transition, split_index: int,
                          config: MinimizeConfig | None = None, rtol: float = 1e-12) -> bool:
    """Trc over the whole set equals the sum over the two pieces meeting at ``split_index``."""
    if not 0 < split_index < tr.K:
        raise ValueError("split_index must be interior")
    whole = transition_cost(model, tr, config).total
    parts = (transition_cost(model, tr.sub(0, split_index), config).total
             + transition_cost(model, tr.sub(split_index, tr.K), config).total)
    return abs(whole - parts) <= rtol * max(1.0, abs(whole))


# --------------------------------------------------------------------------
# viscous transitions
# --------------------------------------------------------------------------

def _iterate_M(model, t, start, tcfg, config, max_iter):
    """theta_{n} = selected member of M(t, theta_{n-1}) until stabilization.

    Stops at a point whose residual is below ``tol_stable`` and whose next
    step would dissipate at most ``tol_x``.
    """
    states = [as_state(start, model.dim)]
    R = []
    steps = []
    converged = False
    while True:
        cur = states[-1]
        y = moreau_yosida(model, t, cur, config)
        r = max(float(model.E(t, cur)) - y.value, 0.0)
        R.append(r)
        nxt = y.minimal_set[0]
        step = float(model.D(cur, nxt))
        if r <= tcfg.tol_stable and step <= tcfg.tol_x:
            converged = True
            break
        if len(states) > max_iter or np.array_equal(nxt, cur):
            break
        steps.append(step)
        states.append(nxt)
    tail = 0.0
    if not converged and len(steps) >= 2 and steps[-2] > 0:
        rho = steps[-1] / steps[-2]
        tail = steps[-1] * rho / (1.0 - rho) if rho < 1 else math.inf
    return np.array(states), np.array(R), converged, tail


def _kinds(R, tol):
    return tuple("stable" if r <= tol else "viscous" for r in R)


def construct_viscous_transition(model: RisModel, t: float, u_start, max_iter: int | None = None,
                                 config: MinimizeConfig | None = None,
                                 tcfg: TransitionConfig | None = None) -> Transition:
    """Iterate the minimal-set map from ``u_start`` at frozen time ``t``.

    Stops once the current point is stable and the last step is below
    ``tol_x``; the returned transition carries ``converged`` and, when the
    iteration was cut, a geometric estimate of the missing tail cost.
    """
    tcfg = tcfg or TransitionConfig()
    states, R, conv, tail = _iterate_M(model, t, u_start, tcfg, config,
                                       tcfg.max_iter if max_iter is None else max_iter)
    return Transition(np.arange(states.shape[0], dtype=float), states, float(t),
                      _kinds(R, tcfg.tol_stable), conv, tail, R.copy())


def _concat(t, pieces, tol):
    """Join state sequences (dropping repeated junction points) into a transition."""
    states, R = [], []
    for s, r in pieces:
        for x, rx in zip(s, r):
            if states and np.array_equal(states[-1], x):
                R[-1] = rx if rx is not None else R[-1]
                continue
            states.append(np.asarray(x, float))
            R.append(rx)
    tr = Transition(np.arange(len(states), dtype=float), np.array(states), float(t))
    if all(r is not None for r in R):
        tr.residual_cache = np.array(R, float)
        tr.kinds = _kinds(tr.residual_cache, tol)
    return tr


def sampled_segment(model: RisModel, t: float, a, b, k: int, config=None) -> Transition:
    """The straight segment from ``a`` to ``b`` sampled at ``k + 1`` equispaced points."""
    a, b = as_state(a, model.dim), as_state(b, model.dim)
    w = np.linspace(0.0, 1.0, k + 1)[:, None]
    pts = (1.0 - w) * a + w * b
    pts[0], pts[-1] = a, b
    return Transition(np.arange(k + 1, dtype=float), pts, float(t))


def refined_segment(model: RisModel, t: float, a, b, config=None, tcfg: TransitionConfig | None = None):
    """Sample the segment with doubling resolution until its gap sum is below ``gap_tol``.

    Dyadic samplings are nested, so residuals are computed once on the finest
    one and reused. Returns the finest transition and the list of
    ``(k, total cost)`` pairs over the doubling sequence; for a stable
    segment the totals decrease towards ``d(a, b)``.
    """
    tcfg = tcfg or TransitionConfig()
    cap = tcfg.max_samples if model.dim == 1 else 64
    coarse = sampled_segment(model, t, a, b, 1, config)
    gap1 = float(np.sum(np.atleast_1d(model.delta(coarse.states[:-1], coarse.states[1:]))))
    # a quadratic correction gives gap(k) = gap(1) / k; start from that guess
    k = 1
    while k < cap and gap1 / k >= tcfg.gap_tol:
        k *= 2
    while True:
        fine = sampled_segment(model, t, a, b, k, config)
        R = transition_residuals(model, fine, config)
        history = []
        j = 1
        while j <= k:
            idx = np.arange(0, k + 1, k // j)
            sub = Transition(np.arange(j + 1, dtype=float), fine.states[idx], float(t),
                             residual_cache=R[idx])
            history.append((j, transition_cost(model, sub, config).total))
            j *= 2
        gap = transition_cost(model, fine, config).gap_part
        if gap < tcfg.gap_tol or 2 * k > cap:
            return fine, history
        k *= 2


def _bridge(model, t, frm, to, config, tcfg):
    """Cheapest of a direct and a refined straight connection between two states."""
    if np.array_equal(frm, to):
        return [to], [None]
    direct = Transition([0.0, 1.0], np.array([frm, to]), t)
    c_direct = transition_cost(model, direct, config)
    use = direct
    if c_direct.gap_part + c_direct.residual_part > tcfg.gap_tol:
        seg, _ = refined_segment(model, t, frm, to, config, tcfg)
        if transition_cost(model, seg, config).total < c_direct.total:
            use = seg
    R = transition_residuals(model, use, config)
    return list(use.states[1:]), list(R[1:])


def lattice_oracle(model: RisModel, t: float, u_minus, u_plus, config=None,
                   tcfg: TransitionConfig | None = None):
    """Cheapest path of at most ``lattice_K`` points through a uniform lattice (1D only).

    The lattice covers the search box and contains both endpoints. Path costs
    are additive (edge cost d + delta plus the residual of the departure
    point), so a hop-limited Bellman-Ford recursion is exact on the lattice.
    """
    tcfg = tcfg or TransitionConfig()
    if model.dim != 1:
        raise ValueError("the lattice oracle is one-dimensional")
    lo, hi = model.search_box[0]
    nodes = np.unique(np.concatenate((np.linspace(lo, hi, tcfg.lattice_points),
                                      np.asarray(u_minus, float).ravel(),
                                      np.asarray(u_plus, float).ravel())))
    src = int(np.flatnonzero(nodes == float(np.ravel(u_minus)[0]))[0])
    dst = int(np.flatnonzero(nodes == float(np.ravel(u_plus)[0]))[0])
    X = nodes[:, None]
    R = residuals(model, t, X, config)
    edge = (np.asarray(model.d(X[:, None, :], X[None, :, :]), float)
            + np.asarray(model.delta(X[:, None, :], X[None, :, :]), float) + R[:, None])
    best = np.full(nodes.size, np.inf)
    best[src] = 0.0
    pred = [np.full(nodes.size, -1)]
    for _ in range(tcfg.lattice_K - 1):
        cand = best[:, None] + edge
        arg = np.argmin(cand, axis=0)
        new = cand[arg, np.arange(nodes.size)]
        improved = new < best
        best = np.where(improved, new, best)
        pred.append(np.where(improved, arg, -1))
    # rebuild the path by walking the predecessor layers backwards
    path = [dst]
    node = dst
    for layer in reversed(pred[1:]):
        p = layer[node]
        if p >= 0:
            path.append(int(p))
            node = int(p)
    path = path[::-1]
    if path[0] != src:
        path = [src, dst]
    states = nodes[path][:, None]
    tr = Transition(np.arange(len(path), dtype=float), states, float(t))
    tr.residual_cache = R[path]
    return tr


@dataclass
class JumpCost:
    cost: float
    witness: Transition
    breakdown: CostBreakdown
    candidates: dict
    lower_bounds_ok: bool
    segment_history: list = field(default_factory=list)


def jump_cost(model: RisModel, t: float, u_minus, u_plus, config: MinimizeConfig | None = None,
              tcfg: TransitionConfig | None = None, oracle: bool = True) -> JumpCost:
    """Smallest transition cost over a family of candidate transitions.

    Candidates: the direct two-point transition; the refined straight segment;
    the iterated-M transition from every member of M(t, u_minus), bridged to
    ``u_plus``; when ``u_minus`` is stable, a short sliding step of each
    length in ``eps_list`` followed by the iterated-M transition; and (1D)
    the lattice oracle. The result is an upper bound for the jump cost;
    the lower bounds ``cost >= d`` and ``cost >= E(u_minus) - E(u_plus)``
    are checked and reported.
    """
    tcfg = tcfg or TransitionConfig()
    t = float(t)
    um, up = as_state(u_minus, model.dim), as_state(u_plus, model.dim)
    if np.array_equal(um, up):
        w = Transition([0.0], um[None, :], t, ("stable",), residual_cache=np.zeros(1))
        return JumpCost(0.0, w, CostBreakdown(0.0, 0.0, 0.0), {"singleton": 0.0}, True)
    cands: dict[str, Transition] = {}
    cands["direct"] = Transition([0.0, 1.0], np.array([um, up]), t)
    seg, history = refined_segment(model, t, um, up, config, tcfg)
    cands["segment"] = seg

    y = moreau_yosida(model, t, um, config)
    r0 = max(float(model.E(t, um)) - y.value, 0.0)
    for i, m in enumerate(y.minimal_set[:4]):
        if np.array_equal(m, um):
            continue
        states, R, _, _ = _iterate_M(model, t, m, tcfg, config, tcfg.max_iter)
        bs, br = _bridge(model, t, states[-1], up, config, tcfg)
        cands[f"viscous[{i}]"] = _concat(t, [([um], [r0]), (states, list(R)),
                                             (bs, br)], tcfg.tol_stable)
    if r0 <= tcfg.tol_stable:
        direction = (up - um) / np.linalg.norm(up - um)
        span = float(np.linalg.norm(up - um))
        for eps in tcfg.eps_list:
            if eps >= span:
                continue
            first = np.clip(um + eps * direction, model.search_box[:, 0], model.search_box[:, 1])
            states, R, _, _ = _iterate_M(model, t, first, tcfg, config, tcfg.max_iter)
            bs, br = _bridge(model, t, states[-1], up, config, tcfg)
            cands[f"slide[{eps:g}]"] = _concat(t, [([um], [r0]), (states, list(R)),
                                                   (bs, br)], tcfg.tol_stable)
    if oracle and model.dim == 1:
        cands["lattice"] = lattice_oracle(model, t, um, up, config, tcfg)

    costs = {name: transition_cost(model, tr, config) for name, tr in cands.items()}
    totals = {name: c.total for name, c in costs.items()}
    name = min(totals, key=lambda k: (totals[k], k))
    best = cands[name]
    if best.kinds is None:
        best.kinds = _kinds(transition_residuals(model, best, config), tcfg.tol_stable)
    cost = totals[name]
    slack = 1e-9 * max(1.0, abs(cost))
    ok = (cost >= float(model.d(um, up)) - slack
          and cost >= float(model.E(t, um)) - float(model.E(t, up)) - slack)
    return JumpCost(cost, best, costs[name], totals, bool(ok), history)


@dataclass
class JumpConditionReport:
    residual_minus: float
    residual_plus: float
    residual_total: float
    costs: tuple

    @property
    def max_residual(self) -> float:
        return max(self.residual_minus, self.residual_plus, self.residual_total)


def verify_jump_conditions(model: RisModel, t: float, u_minus, u_mid, u_plus,
                           config: MinimizeConfig | None = None,
                           tcfg: TransitionConfig | None = None, costs=None) -> JumpConditionReport:
    """Defects |E(a) - E(b) - c(t, a, b)| for the pairs (u-, u), (u, u+), (u-, u+).

    ``costs`` may carry precomputed values of the three jump costs.
    """
    pairs = [(u_minus, u_mid), (u_mid, u_plus), (u_minus, u_plus)]
    if costs is None:
        costs = tuple(jump_cost(model, t, a, b, config, tcfg).cost for a, b in pairs)
    res = [abs(float(model.E(t, np.asarray(a, float))) - float(model.E(t, np.asarray(b, float))) - c)
           for (a, b), c in zip(pairs, costs)]
    return JumpConditionReport(res[0], res[1], res[2], tuple(costs))


def energy_drop_bound_check(model: RisModel, tr: Transition, config: MinimizeConfig | None = None,
                            tol: float = 1e-9) -> bool:
    """E(t, theta_K) + Trc >= E(t, theta_0) - tol."""
    c = transition_cost(model, tr, config).total
    return float(model.E(tr.time, tr.u_plus)) + c >= float(model.E(tr.time, tr.u_minus)) - tol


def rescale_transition(model: RisModel, tr: Transition) -> Transition:
    """Reparametrize by s -> (s - s_0)/(s_K - s_0) + cumulative (d + delta).

    The new parameters span ``[0, 1 + C]`` with ``C`` the sum of the
    variation and gap parts; states (and hence all cost parts) are unchanged.
    """
    if tr.K == 0:
        return replace(tr, params=np.zeros(1))
    a, b = tr.states[:-1], tr.states[1:]
    inc = np.atleast_1d(model.d(a, b)) + np.atleast_1d(model.delta(a, b))
    s = (tr.params - tr.params[0]) / (tr.params[-1] - tr.params[0])
    new = s + np.concatenate(([0.0], np.cumsum(inc)))
    return Transition(new, tr.states.copy(), tr.time, tr.kinds, tr.converged, tr.tail_bound,
                      None if tr.residual_cache is None else tr.residual_cache.copy())


@dataclass(frozen=True)
class Segment:
    kind: str  # "sliding" or "jump"
    start: int
    end: int


def decompose_transition(model: RisModel, tr: Transition, config: MinimizeConfig | None = None,
                         tcfg: TransitionConfig | None = None) -> list[Segment]:
    """Split the index range into maximal sliding and pure-jump runs.

    A step is sliding when both of its points are stable and its dissipation
    is at most ``slide_fraction`` of the endpoint distance; other steps are
    jumps. Sliding runs carrying less than that same amount of dissipation in
    total (the geometric tail of a viscous sequence) are absorbed into the
    neighbouring jump run.
    """
    tcfg = tcfg or TransitionConfig()
    if tr.K == 0:
        return [Segment("sliding", 0, 0)]
    R = transition_residuals(model, tr, config)
    dstep = np.atleast_1d(model.d(tr.states[:-1], tr.states[1:]))
    scale = tcfg.slide_fraction * max(float(model.d(tr.u_minus, tr.u_plus)), float(np.sum(dstep)) * 1e-3, 1e-300)
    stable = R <= tcfg.tol_stable
    kinds = ["sliding" if stable[j] and stable[j + 1] and dstep[j] <= scale else "jump"
             for j in range(tr.K)]
    runs = _runs(kinds)
    if any(k == "jump" for k, _, _ in runs):
        kinds = list(kinds)
        for k, i, j in runs:
            if k == "sliding" and float(np.sum(dstep[i:j])) < scale:
                kinds[i:j] = ["jump"] * (j - i)
        runs = _runs(kinds)
    return [Segment(k, i, j) for k, i, j in runs]


def _runs(kinds):
    """Maximal runs as (kind, first point, last point) over step labels."""
    out = []
    start = 0
    for j in range(1, len(kinds) + 1):
        if j == len(kinds) or kinds[j] != kinds[start]:
            out.append((kinds[start], start, j))
            start = j
    return out
