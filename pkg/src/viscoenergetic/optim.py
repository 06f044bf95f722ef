"""Global minimization engines.

Everything downstream (Moreau-Yosida values, minimal sets, the incremental
scheme) relies on these routines returning the *global* minimum over a box,
so they are deliberately brute force: a uniform scan followed by local
refinement of every promising cell.

Objectives are vectorized: the 1D engine passes a 1-D array of abscissae and
expects an array of values back; the n-D engine passes an ``(m, n)`` array of
points and expects ``(m,)`` values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import EvaluationError

@dataclass(frozen=True)
class MinimizeConfig:
    grid_points: int | None = None
    refine_iters: int = 60
    multistart: int = 8
    tol_x: float = 1e-10
    tol_f: float = 1e-12
    max_candidates: int = 8
    max_sweeps: int = 400
    lattice_cap: int = 200_000
    seed: int = 20170417

    def __post_init__(self):
        if self.grid_points is not None and self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")
        if self.tol_x <= 0 or self.tol_f <= 0:
            raise ValueError("tolerances must be positive")
        if self.refine_iters < 1 or self.multistart < 0:
            raise ValueError("refine_iters >= 1 and multistart >= 0 required")

    def points_for(self, n: int) -> int:
        if self.grid_points is not None:
            return self.grid_points
        return 2048 if n == 1 else 64


@dataclass
class MinimizeResult:
    minimizer: np.ndarray
    value: float
    all_minimizers: list[np.ndarray] = field(default_factory=list)
    on_boundary: bool = False
    evaluations: int = 0


def _checked(values, what="objective"):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise EvaluationError(f"non-finite {what} value encountered")
    return values


def _cluster(points, values, radius, order_key):
    """Greedy clustering: keep the best point of each group within ``radius``."""
    kept: list[int] = []
    for i in order_key:
        if all(np.max(np.abs(points[i] - points[j])) > radius for j in kept):
            kept.append(i)
    return kept


def _zoom_rows(f, a, b, iters, tol, points=33, tol_f=0.0):
    """Nested-grid bracket refinement run on arrays of brackets at once.

    Each round evaluates ``points`` equispaced abscissae in every bracket and
    shrinks it to the two cells around the best one, a factor
    ``(points - 1) / 2`` per round. Like golden section it assumes the
    bracket holds a single basin; unlike it, each round is one batched call.
    A bracket is done once it is narrower than ``tol`` and its values are
    within ``tol_f`` of the best (a kink needs more digits in x than a
    smooth minimum), or once it reaches rounding width.
    """
    shape = a.shape
    a, b = a.astype(float).ravel(), b.astype(float).ravel()
    rows = np.arange(a.size)
    frac = np.linspace(0.0, 1.0, points)
    x = fx = None
    n_eval = 0
    for _ in range(iters):
        pts = a[:, None] + (b - a)[:, None] * frac
        fp = f(pts.reshape(shape + (points,))).reshape(a.size, points)
        n_eval += fp.size
        j = np.argmin(fp, axis=1)
        x, fx = pts[rows, j], fp[rows, j]
        jl, jr = np.maximum(j - 1, 0), np.minimum(j + 1, points - 1)
        a, b = pts[rows, jl], pts[rows, jr]
        spread = np.maximum(fp[rows, jl], fp[rows, jr]) - fx
        tiny = b - a <= 8.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(x))
        if np.all(((b - a <= tol) & (spread <= tol_f)) | tiny):
            break
    return x.reshape(shape), fx.reshape(shape), n_eval


def _parabolic_rows(f, x, fx, h, lo, hi):
    # Vertex of the parabola through x-h, x, x+h, kept only where it does not
    # increase the value beyond rounding. Recovers the digits a bracketing search loses on
    # smooth minima, where value differences drop below rounding.
    xl, xr = np.maximum(lo, x - h), np.minimum(hi, x + h)
    fl, fr = f(xl), f(xr)
    num = (x - xl) ** 2 * (fx - fr) - (x - xr) ** 2 * (fx - fl)
    den = (x - xl) * (fx - fr) - (x - xr) * (fx - fl)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = x - 0.5 * num / den
    ok = (xl < x) & (x < xr) & np.isfinite(v) & (v >= xl) & (v <= xr)
    v = np.where(ok, v, x)
    fv = f(v)
    # the vertex wins ties within rounding: it is the more accurate abscissa
    better = ok & (fv <= fx + 8.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(fx)))
    return np.where(better, v, x), np.where(better, fv, fx), 3 * x.size


def _refine_rows(f, grid, fg, cand, config, lo, hi):
    """Refine grid-local minima ``cand`` (rows x candidates) of a row-wise scan."""
    m = grid.size
    h = (hi - lo) / (m - 1)
    a = grid[np.maximum(cand - 1, 0)]
    b = grid[np.minimum(cand + 1, m - 1)]
    x, fx, n_eval = _zoom_rows(f, a, b, config.refine_iters, config.tol_x, tol_f=config.tol_f)
    fgc = np.take_along_axis(fg, cand, axis=1)
    keep_grid = fgc < fx
    x = np.where(keep_grid, grid[cand], x)
    fx = np.where(keep_grid, fgc, fx)
    # two scales, so a kink close to a smooth minimum spoils at most one
    for scale in (1e-5, 1e-7):
        x, fx, k = _parabolic_rows(f, x, fx, min(h, scale * (hi - lo)), lo, hi)
        n_eval += k
    return x, fx, n_eval


def _grid_local_minima(fg, count):
    """Indices of the ``count`` lowest grid-local minima of each row (padded)."""
    rows, m = fg.shape
    left = np.concatenate((np.full((rows, 1), np.inf), fg[:, :-1]), axis=1)
    right = np.concatenate((fg[:, 1:], np.full((rows, 1), np.inf)), axis=1)
    masked = np.where((fg <= left) & (fg <= right), fg, np.inf)
    order = np.argsort(masked, axis=1, kind="stable")[:, :count]
    # rows with fewer local minima repeat their best one
    valid = np.isfinite(np.take_along_axis(masked, order, axis=1))
    return np.where(valid, order, order[:, :1])


def global_minimize_1d(objective: Callable, interval: Sequence[float],
                       config: MinimizeConfig | None = None) -> MinimizeResult:
    """Global minimum of a vectorized scalar objective on a closed interval.

    A uniform scan locates the grid-local minima; the ``max_candidates``
    lowest of them are refined by nested grids on their two adjacent cells
    and polished by one parabolic step. All refined points whose value is
    within ``tol_f`` of the best are reported in ``all_minimizers``.
    """
    config = config or MinimizeConfig()
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise ValueError("empty interval")
    m = config.points_for(1)
    grid = np.linspace(lo, hi, m)
    fg = _checked(objective(grid))[None, :]
    cand = np.unique(_grid_local_minima(fg, config.max_candidates)[0])[None, :]

    def rows(x):
        return _checked(objective(x.ravel())).reshape(x.shape)

    x, fx, k = _refine_rows(rows, grid, fg, cand, config, lo, hi)
    xs_arr, fs_arr = x[0], fx[0]
    order = np.lexsort((xs_arr, fs_arr))
    best = order[0]
    near = [i for i in order if fs_arr[i] <= fs_arr[best] + config.tol_f]
    kept = _cluster(xs_arr[:, None], fs_arr, 2.0 * (hi - lo) / m, near)
    minimizers = [np.array([xs_arr[i]]) for i in sorted(kept, key=lambda i: xs_arr[i])]
    x_best = xs_arr[best]
    edge = 2.0 * config.tol_x + 1e-12 * max(1.0, abs(lo), abs(hi))
    return MinimizeResult(
        minimizer=np.array([x_best]),
        value=float(fs_arr[best]),
        all_minimizers=minimizers,
        on_boundary=bool(x_best - lo <= edge or hi - x_best <= edge),
        evaluations=m + k,
    )


def batch_minimize_1d(objective: Callable, interval: Sequence[float], rows: int,
                      config: MinimizeConfig | None = None, candidates: int = 3):
    """Minimum values of ``rows`` independent 1D problems on a common interval.

    ``objective(Y)`` receives an array of shape ``(rows, ...)`` whose slice
    ``Y[i]`` holds abscissae for problem ``i`` and returns values of the same
    shape.
    The ``candidates`` lowest grid-local minima of each row are refined.
    Returns ``(minimizers, values)``, both of shape ``(rows,)``.
    """
    config = config or MinimizeConfig()
    lo, hi = float(interval[0]), float(interval[1])
    m = config.points_for(1)
    grid = np.linspace(lo, hi, m)
    fg = _checked(objective(np.broadcast_to(grid, (rows, m))))
    cand = _grid_local_minima(fg, candidates)
    x, fx, _ = _refine_rows(lambda y: _checked(objective(y)), grid, fg, cand, config, lo, hi)
    j = np.argmin(fx, axis=1)
    pick = (np.arange(rows), j)
    return x[pick], fx[pick]


def _poll_sweep(f, x, fx, box, step, anchor, tol_x):
    """One Gauss-Seidel pass of vectorized coordinate polls.

    Each coordinate is polled on a geometric ladder of signed offsets (and on
    the anchor value, where the objective may have a kink) in a single call.
    """
    lo, hi = box[:, 0], box[:, 1]
    ladder = np.concatenate((2.0 ** np.arange(3, 0, -1), 2.0 ** -np.arange(0, 30)))
    signed = np.concatenate((ladder, -ladder))
    n_eval = 0
    for i in range(x.size):
        offsets = x[i] + step[i] * signed
        if anchor is not None:
            offsets = np.append(offsets, anchor[i])
        cand = np.repeat(x[None, :], offsets.size, axis=0)
        cand[:, i] = np.clip(offsets, lo[i], hi[i])
        fc = _checked(f(cand))
        n_eval += offsets.size
        j = int(np.argmin(fc))
        if fc[j] < fx:
            moved = abs(cand[j, i] - x[i])
            x, fx = cand[j].copy(), float(fc[j])
            step[i] = max(2.0 * moved, 1e-3 * tol_x)
        else:
            step[i] = max(0.5 * step[i], 1e-3 * tol_x)
    return x, fx, n_eval


def _newton_polish(f, x, fx, box, anchor):
    """Safeguarded Newton step on the smooth face through ``x``.

    Gradient and Hessian come from central differences over the coordinates
    that sit away from their anchor and the box walls; the step is accepted
    only if a trial point along it (optionally snapped back onto anchors it
    would cross) lowers the value.
    """
    lo, hi = box[:, 0], box[:, 1]
    scale = np.maximum(1.0, np.abs(x))
    hg, hh = 5e-6 * scale, 1e-4 * scale
    free = (x - lo > 2 * hh) & (hi - x > 2 * hh)
    if anchor is not None:
        free &= np.abs(x - anchor) > 2 * hh
    idx = np.flatnonzero(free)
    k = idx.size
    if k == 0:
        return x, fx, 0
    eye = np.zeros((k, x.size))
    eye[np.arange(k), idx] = 1.0
    G = eye * hg[idx, None]
    H = eye * hh[idx, None]
    pairs_i, pairs_j = np.triu_indices(k)
    pts = [x + G, x - G,
           x + H[pairs_i] + H[pairs_j], x + H[pairs_i] - H[pairs_j],
           x - H[pairs_i] + H[pairs_j], x - H[pairs_i] - H[pairs_j]]
    vals = _checked(f(np.concatenate(pts)))
    n_eval = vals.size
    gp, gm = vals[:k], vals[k:2 * k]
    m = pairs_i.size
    pp, pm, mp, mm = (vals[2 * k + r * m: 2 * k + (r + 1) * m] for r in range(4))
    grad = (gp - gm) / (2.0 * hg[idx])
    hess = np.zeros((k, k))
    hess[pairs_i, pairs_j] = (pp - pm - mp + mm) / (4.0 * hh[idx][pairs_i] * hh[idx][pairs_j])
    hess = hess + np.triu(hess, 1).T
    try:
        w_min = float(np.linalg.eigvalsh(hess)[0])
        shift = 0.0 if w_min > 1e-10 * max(1.0, np.max(np.abs(np.diag(hess)))) else abs(w_min) + 1e-6
        p = np.linalg.solve(hess + shift * np.eye(k), -grad)
    except np.linalg.LinAlgError:
        return x, fx, n_eval
    if not np.all(np.isfinite(p)):
        return x, fx, n_eval
    betas = np.array([1.0, 0.5, 0.25, 0.125, 2.0, 1e-2])
    step = np.zeros_like(x)
    step[idx] = p
    trial = np.clip(x[None, :] + betas[:, None] * step[None, :], lo, hi)
    if anchor is not None:
        crossed = np.sign(trial - anchor) * np.sign(x - anchor) < 0
        snapped = np.where(crossed, anchor, trial)
        trial = np.concatenate((trial, snapped))
    ft = _checked(f(trial))
    n_eval += ft.size
    j = int(np.argmin(ft))
    if ft[j] < fx:
        return trial[j].copy(), float(ft[j]), n_eval
    return x, fx, n_eval


def _local_descent(f, x0, f0, box, step0, config, anchor=None):
    """Derivative-free local descent from ``x0``.

    Alternates coordinate poll sweeps (which find the active set at kinks)
    with a finite-difference Newton polish on the smooth face and a pattern
    move along the last displacement.
    """
    lo, hi = box[:, 0], box[:, 1]
    x, fx = x0.copy(), float(f0)
    step = np.broadcast_to(np.asarray(step0, float), x.shape).copy()
    betas = np.concatenate((2.0 ** np.arange(-3, 8), [0.75, 1.5]))
    n_eval = 0
    for _ in range(config.max_sweeps):
        x_old, f_old = x.copy(), fx
        x, fx, k = _poll_sweep(f, x, fx, box, step, anchor, config.tol_x)
        n_eval += k
        x, fx, k = _newton_polish(f, x, fx, box, anchor)
        n_eval += k
        delta = x - x_old
        if np.any(delta):
            cand = np.clip(x[None, :] + betas[:, None] * delta[None, :], lo, hi)
            fc = _checked(f(cand))
            n_eval += betas.size
            j = int(np.argmin(fc))
            if fc[j] < fx:
                x, fx = cand[j].copy(), float(fc[j])
        if f_old - fx <= config.tol_f and np.max(np.abs(x - x_old)) <= config.tol_x:
            break
    return x, fx, n_eval


def global_minimize_nd(objective: Callable, box, config: MinimizeConfig | None = None,
                       starts: Sequence | None = None, anchor=None) -> MinimizeResult:
    """Heuristic global minimization over a box in n dimensions.

    The best points of a coarse lattice (skipped when the lattice would exceed
    ``lattice_cap`` points), the caller's ``starts`` and ``multistart`` seeded
    random points are each refined by local descent. ``anchor`` marks where
    the objective may be nonsmooth coordinatewise (the base point of a
    dissipation term). This is a
    multistart heuristic, not a certified global search; it is exact for the
    convex objectives the acceptance suite uses.
    """
    config = config or MinimizeConfig()
    box = np.asarray(box, dtype=float)
    n = box.shape[0]
    if n > 64:
        raise ValueError("dimension cap (64) exceeded")
    lo, hi = box[:, 0], box[:, 1]
    width = hi - lo

    seeds: list[np.ndarray] = []
    g = config.points_for(n)
    n_eval = 0
    while g >= 3 and g ** n > config.lattice_cap:
        g -= 1
    if g >= 3:
        axes = [np.linspace(lo[k], hi[k], g) for k in range(n)]
        lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        fl = _checked(objective(lattice))
        n_eval += fl.size
        top = np.argsort(fl, kind="stable")[: max(1, config.multistart)]
        seeds.extend(lattice[i] for i in top)
        step0 = width / (g - 1)
    else:
        step0 = width / 16.0
    for s in starts or ():
        seeds.append(np.clip(np.asarray(s, float).reshape(n), lo, hi))
    if g < 3:
        rng = np.random.default_rng(config.seed)
        seeds.extend(lo + width * rng.random((config.multistart, n)))
    if not seeds:
        seeds.append(0.5 * (lo + hi))

    f0 = _checked(objective(np.array(seeds)))
    results = []
    for s, fs in zip(seeds, f0):
        x, fx, k = _local_descent(objective, s, fs, box, step0, config, anchor)
        n_eval += k
        results.append((fx, tuple(x), x))
    results.sort(key=lambda r: (r[0], r[1]))
    best_f, _, best_x = results[0]
    near = [r[2] for r in results if r[0] <= best_f + config.tol_f]
    pts = np.array(near)
    kept = _cluster(pts, None, 2.0 * float(np.max(width)) / config.points_for(n),
                    range(len(near)))
    edge = 2.0 * config.tol_x + 1e-12 * max(1.0, float(np.max(np.abs(box))))
    on_boundary = bool(np.any(best_x - lo <= edge) or np.any(hi - best_x <= edge))
    return MinimizeResult(
        minimizer=best_x,
        value=float(best_f),
        all_minimizers=[pts[i] for i in kept],
        on_boundary=on_boundary,
        evaluations=n_eval,
    )


def minimize_over_box(objective_nd: Callable, box, config: MinimizeConfig | None = None,
                      starts: Sequence | None = None, anchor=None) -> MinimizeResult:
    """Dispatch to the 1D engine for one-dimensional boxes, else the n-D one.

    ``objective_nd`` always takes ``(m, n)`` arrays.
    """
    box = np.asarray(box, dtype=float)
    if box.shape[0] == 1:
        return global_minimize_1d(lambda s: objective_nd(s[:, None]), box[0], config)
    return global_minimize_nd(objective_nd, box, config, starts, anchor)
