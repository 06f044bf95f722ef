"""Rate-independent systems (X, E, d, delta) on boxes in R^n.

States are plain 1-D float arrays. Every map carried by a :class:`RisModel`
is vectorized over leading axes: ``energy(t, X)`` with ``X`` of shape
``(..., n)`` returns shape ``(...)``, and ``dissipation(X, Y)`` broadcasts
its two arguments the same way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np


class EvaluationError(ValueError):
    """A model map produced a non-finite value."""


def as_state(x, dim: int | None = None) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError(f"a state must be a flat vector, got shape {x.shape}")
    if dim is not None and x.size != dim:
        raise ValueError(f"expected a state of dimension {dim}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise EvaluationError("state has non-finite coordinates")
    return x


@dataclass(frozen=True)
class LoadProfile:
    """A C^1 load l(t) with its derivative.

    ``kind="linear"`` loads are exactly ``a + b t``; anything else is
    ``"general"`` and triggers the midpoint power-integral policy with an
    error estimate.
    """

    value: Callable[[float], float]
    derivative: Callable[[float], float]
    kind: str = "general"
    slope: float | None = None
    intercept: float | None = None

    @classmethod
    def linear(cls, a: float, b: float) -> "LoadProfile":
        a, b = float(a), float(b)
        return cls(lambda t: a + b * t, lambda t: b, "linear", slope=b, intercept=a)

    @classmethod
    def constant(cls, a: float) -> "LoadProfile":
        return cls.linear(a, 0.0)

    def __call__(self, t):
        return self.value(t)


@dataclass(frozen=True)
class RisModel:
    """The tuple (E, P, d, delta) with a base point, offsets and a search box.

    ``power`` must be the exact time derivative of ``energy``. ``offset`` is
    F_o of the perturbed energy and ``power_const`` the constant C_P with
    |P| <= C_P F on [0, horizon] x box.
    """

    energy: Callable
    power: Callable
    dissipation: Callable
    viscous: Callable
    base_point: np.ndarray
    search_box: np.ndarray
    offset: float = 0.0
    power_const: float = 1.0
    horizon: float = 1.0
    affine_in_time: bool = True
    name: str = "model"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        box = np.asarray(self.search_box, dtype=float).reshape(-1, 2)
        if np.any(box[:, 1] <= box[:, 0]):
            raise ValueError("search_box must have lower < upper in every coordinate")
        object.__setattr__(self, "search_box", box)
        object.__setattr__(self, "base_point", as_state(self.base_point, box.shape[0]))
        if self.offset < 0:
            raise ValueError("offset F_o must be nonnegative")
        if self.power_const < 0:
            raise ValueError("power_const C_P must be nonnegative")

    @property
    def dim(self) -> int:
        return self.search_box.shape[0]

    def E(self, t, x):
        return _finite(self.energy(t, np.asarray(x, float)), "energy")

    def P(self, t, x):
        return _finite(self.power(t, np.asarray(x, float)), "power")

    def d(self, x, y):
        return _finite(self.dissipation(np.asarray(x, float), np.asarray(y, float)), "dissipation")

    def delta(self, x, y):
        return _finite(self.viscous(np.asarray(x, float), np.asarray(y, float)), "viscous correction")

    def D(self, x, y):
        return self.d(x, y) + self.delta(x, y)

    def in_box(self, x, slack: float = 0.0) -> bool:
        x = np.asarray(x, float)
        return bool(np.all(x >= self.search_box[:, 0] - slack) and np.all(x <= self.search_box[:, 1] + slack))

    def with_constants(self, **kw) -> "RisModel":
        return replace(self, **kw)


def _finite(v, what):
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise EvaluationError(f"non-finite {what}")
    return v if v.ndim else float(v)


def perturbed_energy(model: RisModel, t: float, x) -> float:
    """F(t, x) = E(t, x) + d(x_o, x) + F_o."""
    x = np.asarray(x, float)
    return model.E(t, x) + model.d(model.base_point, x) + model.offset


def total_dissipation(model: RisModel, x, y) -> float:
    return model.D(x, y)


def gronwall_envelope(model: RisModel, F0: float, t: float) -> float:
    """A priori ceiling F0 exp(C_P t) for the perturbed energy."""
    if F0 < 0:
        raise ValueError("F0 must be nonnegative")
    return F0 * math.exp(model.power_const * t)


def box_sample(box, count: int, rng) -> np.ndarray:
    box = np.asarray(box, float)
    return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((count, box.shape[0]))


def scan_points(box, per_axis: int = 257, cap: int = 20_000, seed: int = 0) -> np.ndarray:
    """Deterministic probe set for a box: a full lattice when small, else random."""
    box = np.asarray(box, float)
    n = box.shape[0]
    if per_axis ** n <= cap:
        axes = [np.linspace(b[0], b[1], per_axis) for b in box]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    return box_sample(box, cap, np.random.default_rng(seed))


def calibrate_constants(model: RisModel, times: int = 33, safety: float = 1.25,
                        margin: float = 1.0, offset: float | None = None,
                        power_const: float | None = None) -> RisModel:
    """Fill in F_o and C_P by scanning [0, horizon] x box.

    F_o makes the perturbed energy at least ``margin`` everywhere on the scan
    (so the power bound |P| <= C_P F can hold where P != 0); C_P is the largest
    observed ratio |P| / F times ``safety`` (exactly 0 when P vanishes on the
    scan, e.g. for constant loads).
    """
    pts = scan_points(model.search_box)
    ts = np.linspace(0.0, model.horizon, times)
    dist = model.d(model.base_point, pts)
    if offset is None:
        low = min(float(np.min(model.E(t, pts) + dist)) for t in ts)
        offset = max(0.0, margin - low)
    if power_const is None:
        ratio = 0.0
        for t in ts:
            F = model.E(t, pts) + dist + offset
            P = np.abs(model.P(t, pts))
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(P > 0, P / F, 0.0)
            ratio = max(ratio, float(np.max(r)))
        power_const = safety * ratio
    return model.with_constants(offset=float(offset), power_const=float(power_const))


def one_sided_dissipation(alpha_plus: float, alpha_minus: float):
    """d(u, v) = alpha_+ (v - u)_+ + alpha_- (v - u)_-, summed over coordinates."""
    def d(x, y):
        inc = np.asarray(y, float) - np.asarray(x, float)
        return np.sum(alpha_plus * np.maximum(inc, 0.0) + alpha_minus * np.maximum(-inc, 0.0), axis=-1)
    return d


def quadratic_viscosity(mu: float, weight: float = 1.0):
    def delta(x, y):
        inc = np.asarray(y, float) - np.asarray(x, float)
        return 0.5 * mu * weight * np.sum(inc * inc, axis=-1)
    return delta
