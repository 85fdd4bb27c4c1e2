"""Right-hand sides of the homogeneous gradient estimators.

Three update laws are supported, all written in terms of the output error
``e = u'theta_hat - y``:

* single exponent ``p``:  ``theta_hat' = -[e]^p u``
* composite exponents:    ``theta_hat' = -(sum_i [e]^{p_i}) u``
* scalar tracker:         ``theta_hat' = -L sign_d(e) sign_d(u)``

where ``[w]^p = |w|^p sign(w)`` and ``sign_d`` is the boundary-layer sign
``clamp(w / delta, -1, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "EstimatorError",
    "ExponentSet",
    "Single",
    "Composite",
    "Tracker",
    "EstimatorSpec",
    "signed_power",
    "sign_delta",
    "rhs_estimate",
    "rhs_error",
    "homogeneity_residual",
    "cost",
]

DEFAULT_DELTA = 1e-4


class EstimatorError(ValueError):
    pass


def signed_power(w, p: float):
    """``|w|**p * sign(w)`` with the value 0 at ``w = 0`` for every ``p >= 0``."""
    if p < 0:
        raise EstimatorError(f"exponent must be >= 0, got {p}")
    if np.ndim(w) == 0:
        w = float(w)
        if w == 0.0:
            return 0.0
        return math.copysign(abs(w) ** p, w)
    w = np.asarray(w, dtype=float)
    return np.sign(w) * np.abs(w) ** p


def sign_delta(w, delta: float):
    """Saturated linear sign of width ``delta``."""
    if np.ndim(w) == 0:
        return min(1.0, max(-1.0, float(w) / delta))
    return np.clip(np.asarray(w, dtype=float) / delta, -1.0, 1.0)


@dataclass(frozen=True)
class ExponentSet:
    exponents: tuple

    def __post_init__(self):
        vals = sorted({float(p) for p in self.exponents})
        if not vals:
            raise EstimatorError("exponent set is empty")
        for p in vals:
            if not (math.isfinite(p) and p >= 0):
                raise EstimatorError(f"exponents must be finite and >= 0, got {p}")
        object.__setattr__(self, "exponents", tuple(vals))

    @classmethod
    def of(cls, exponents: Iterable[float]) -> "ExponentSet":
        return cls(tuple(exponents))

    @property
    def p_min(self) -> float:
        return self.exponents[0]

    @property
    def p_max(self) -> float:
        return self.exponents[-1]

    @property
    def below_one(self) -> tuple:
        return tuple(p for p in self.exponents if p < 1)

    @property
    def above_one(self) -> tuple:
        return tuple(p for p in self.exponents if p > 1)

    def __iter__(self):
        return iter(self.exponents)

    def __len__(self):
        return len(self.exponents)


@dataclass(frozen=True)
class Single:
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 0):
            raise EstimatorError(f"exponent p must be finite and >= 0, got {self.p}")
        object.__setattr__(self, "p", float(self.p))

    @property
    def scalar_only(self) -> bool:
        """p = 0 only has a convergence guarantee for scalar problems."""
        return self.p == 0

    def gain(self, e: float) -> float:
        return signed_power(e, self.p)


@dataclass(frozen=True)
class Composite:
    exponents: ExponentSet

    def __post_init__(self):
        if not isinstance(self.exponents, ExponentSet):
            object.__setattr__(self, "exponents", ExponentSet.of(self.exponents))

    def gain(self, e: float) -> float:
        return sum(signed_power(e, p) for p in self.exponents)


@dataclass(frozen=True)
class Tracker:
    L: float
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if not (math.isfinite(self.L) and self.L > 0):
            raise EstimatorError(f"tracker gain L must be > 0, got {self.L}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise EstimatorError(f"boundary layer delta must be > 0, got {self.delta}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "delta", float(self.delta))

    def gain(self, e: float) -> float:
        return sign_delta(e, self.delta)


EstimatorSpec = Single | Composite | Tracker


def describe(spec: EstimatorSpec) -> str:
    """Short label used for file names and table columns."""
    if isinstance(spec, Single):
        return f"single_p{spec.p:g}"
    if isinstance(spec, Composite):
        return "composite_" + "_".join(f"{p:g}" for p in spec.exponents)
    return f"tracker_L{spec.L:g}"


def _check(spec, a, u):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if a.shape != u.shape or a.ndim != 1:
        raise EstimatorError(f"dimension mismatch: state {a.shape} vs regressor {u.shape}")
    if isinstance(spec, Tracker) and a.size != 1:
        raise EstimatorError("the tracker is defined for scalar problems only (n = 1)")
    return a, u


def rhs_estimate(spec: EstimatorSpec, t: float, theta_hat, u_t, y_t: float) -> np.ndarray:
    """Time derivative of the estimate given the measurement ``y_t``."""
    theta_hat, u = _check(spec, theta_hat, u_t)
    e = float(u @ theta_hat) - float(y_t)
    if isinstance(spec, Tracker):
        return -spec.L * spec.gain(e) * sign_delta(u, spec.delta)
    return -spec.gain(e) * u


def rhs_error(spec: EstimatorSpec, t: float, x, u_t, theta_dot_t=None) -> np.ndarray:
    """Time derivative of the estimation error ``x = theta_hat - theta``.

    ``theta_dot_t`` only enters for the tracker; constant-parameter
    problems pass zero (the default).
    """
    x, u = _check(spec, x, u_t)
    e = float(u @ x)
    if isinstance(spec, Tracker):
        theta_dot = 0.0 if theta_dot_t is None else np.atleast_1d(np.asarray(theta_dot_t, dtype=float))
        return -spec.L * spec.gain(e) * sign_delta(u, spec.delta) - theta_dot
    return -spec.gain(e) * u


def homogeneity_residual(spec: Single, t: float, x, scale: float, u_t) -> float:
    """Relative defect of ``f(t, s x) = s^p f(t, x)`` for the single-exponent field."""
    if not isinstance(spec, Single):
        raise EstimatorError("homogeneity is only defined for the single-exponent law")
    if not scale > 0:
        raise EstimatorError("scale must be > 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    scaled = rhs_error(spec, t, scale * x, u_t)
    ref = scale ** spec.p * rhs_error(spec, t, x, u_t)
    return float(np.linalg.norm(scaled - ref) / max(np.linalg.norm(ref), 1e-300))


def cost(p: float, theta_hat, u_t, y_t: float) -> float:
    """Instantaneous cost ``|u'theta_hat - y|^(p+1) / (p+1)``; the single law is its negative gradient."""
    e = float(np.dot(np.atleast_1d(u_t), np.atleast_1d(theta_hat))) - float(y_t)
    return abs(e) ** (p + 1) / (p + 1)
