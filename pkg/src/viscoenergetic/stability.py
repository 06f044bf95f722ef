"""Moreau-Yosida values, minimal sets and the residual stability function.

For a state ``x`` at time ``t``::

    Y(t, x) = min_y E(t, y) + D(x, y)        (D = d + delta)
    M(t, x) = argmin of the same problem
    R(t, x) = E(t, x) - Y(t, x) >= 0

``R`` vanishes exactly on the D-stable states. All minimizations run over
the model's search box with the engines of :mod:`viscoenergetic.optim`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import RisModel, as_state
from .optim import MinimizeConfig, batch_minimize_1d, minimize_over_box

TOL_STABLE = 1e-7


class Yosida(NamedTuple):
    value: float
    minimal_set: list
    on_boundary: bool


@dataclass
class StabilityReport:
    yosida: float
    residual: float
    residual_raw: float
    minimal_set: list = field(default_factory=list)
    stable: bool = False
    on_boundary: bool = False


def yosida_objective(model: RisModel, t: float, x):
    """Vectorized ``y -> E(t, y) + D(x, y)`` over ``(m, n)`` arrays."""
    x = np.asarray(x, float)
    energy, d, delta = model.energy, model.dissipation, model.viscous

    def f(Y):
        return energy(t, Y) + d(x, Y) + delta(x, Y)
    return f


def select_minimizer(model: RisModel, x, candidates):
    """Deterministic choice from a minimal set: least d(x, .), then lexicographic."""
    x = np.asarray(x, float)
    return min(candidates, key=lambda c: (float(model.d(x, c)), tuple(np.asarray(c, float))))


def moreau_yosida(model: RisModel, t: float, x, config: MinimizeConfig | None = None,
                  starts=None) -> Yosida:
    """Y(t, x) together with every near-global minimizer.

    ``x`` itself is always tried. It joins the minimal set only when its value
    matches the best one to rounding accuracy: the lazy tie-break would
    otherwise freeze states that should creep by less than sqrt(tol_f).
    """
    config = config or MinimizeConfig()
    x = as_state(x, model.dim)
    f = yosida_objective(model, t, x)
    seeds = [x] + list(starts or ())
    res = minimize_over_box(f, model.search_box, config, starts=seeds, anchor=x)
    value = res.value
    fx = float(f(x[None, :])[0])
    members = [np.asarray(m, float) for m in res.all_minimizers]
    if fx <= value + 4.0 * np.finfo(float).eps * max(1.0, abs(value)):
        if fx < value:
            value = fx
            members = [m for m in members if float(f(m[None, :])[0]) <= value + config.tol_f]
        # x stands for its whole basin: drop refined copies of it
        radius = 2.0 * float(np.max(np.diff(model.search_box, axis=1))) / config.points_for(model.dim)
        members = [m for m in members if np.max(np.abs(m - x)) > radius]
        members.append(x.copy())
    members.sort(key=lambda c: (float(model.d(x, c)), tuple(c)))
    return Yosida(float(value), members, _touches_box(model, members[0], config))


def _touches_box(model: RisModel, y, config: MinimizeConfig) -> bool:
    box = model.search_box
    edge = 2.0 * config.tol_x + 1e-12 * max(1.0, float(np.max(np.abs(box))))
    y = np.asarray(y, float)
    return bool(np.any(y - box[:, 0] <= edge) or np.any(box[:, 1] - y <= edge))


def stability_report(model: RisModel, t: float, x, config: MinimizeConfig | None = None,
                     tol_stable: float = TOL_STABLE) -> StabilityReport:
    config = config or MinimizeConfig()
    x = as_state(x, model.dim)
    y = moreau_yosida(model, t, x, config)
    raw = float(model.E(t, x)) - y.value
    r = max(raw, 0.0)
    return StabilityReport(y.value, r, raw, y.minimal_set, r <= tol_stable, y.on_boundary)


def residual(model: RisModel, t: float, x, config: MinimizeConfig | None = None) -> float:
    """R(t, x) = E(t, x) - Y(t, x), with solver slack below zero clamped away."""
    return stability_report(model, t, x, config).residual


def residuals(model: RisModel, t: float, X, config: MinimizeConfig | None = None) -> np.ndarray:
    """R(t, .) at every row of ``X``; batched in one dimension."""
    config = config or MinimizeConfig()
    X = np.asarray(X, float).reshape(-1, model.dim)
    if X.shape[0] == 0:
        return np.zeros(0)
    if model.dim > 1:
        return np.array([residual(model, t, x, config) for x in X])
    energy, d, delta = model.energy, model.dissipation, model.viscous
    xs = X[:, :1]

    def f(Y):
        base = xs.reshape((-1,) + (1,) * (Y.ndim - 1) + (1,))
        Yc = Y[..., None]
        return energy(t, Yc) + d(base, Yc) + delta(base, Yc)

    _, values = batch_minimize_1d(f, model.search_box[0], X.shape[0], config)
    ex = np.asarray(model.E(t, X), float)
    # the state itself is a competitor with value E(t, x)
    return np.maximum(ex - np.minimum(values, ex), 0.0)


def is_quasi_stable(model: RisModel, t: float, x, Q: float, config: MinimizeConfig | None = None,
                    tol_stable: float = TOL_STABLE) -> bool:
    """True iff R(t, x) <= Q + tol_stable, i.e. (t, x) is (D, Q)-quasi-stable."""
    if Q < 0:
        raise ValueError("Q must be nonnegative")
    return residual(model, t, x, config) <= Q + tol_stable


def local_stability_check_1d(model: RisModel, t: float, x, tol: float = 1e-6, h: float = 1e-6) -> bool:
    """First-order stability test ``-alpha_- <= dE/dx <= alpha_+`` in one dimension.

    The slopes ``alpha_+ = d(x, x+1)`` and ``alpha_- = d(x, x-1)`` are read
    off the dissipation, which must be positively 1-homogeneous; the energy
    slope is a central difference with step ``h``.
    """
    if model.dim != 1:
        raise ValueError("local_stability_check_1d needs a one-dimensional model")
    x = as_state(x, 1)
    ap = float(model.d(x, x + 1.0))
    am = float(model.d(x, x - 1.0))
    slope = (float(model.E(t, x + h)) - float(model.E(t, x - h))) / (2.0 * h)
    return -am - tol <= slope <= ap + tol
