"""Convergence-time bounds, closed-form solutions and convergence classes.

All bounds are integer multiples of the PE window ``T`` and use the
certificate's conservative ``epsilon``, so they are upper bounds for the
certified signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .estimators import Composite, EstimatorSpec, ExponentSet, Single, Tracker
from .pe import PECertificate

__all__ = [
    "BoundError",
    "BoundReport",
    "ConvergenceClass",
    "theorem1_bound",
    "theorem2_escape_bound",
    "theorem3_fixed_time_bound",
    "scalar_V_closed_form",
    "regressor_power_integral",
    "piecewise_z",
    "piecewise_x",
    "projection_step",
    "orthogonality_dwell",
    "orthogonality_ball_radius",
    "classify",
    "tracker_gain_check",
]


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class BoundReport:
    kind: str  # finite_time | escape | fixed_time
    bound: float
    k: int
    T: float
    epsilon: float
    inputs: dict = field(default_factory=dict)
    # (k1, k2) for the fixed-time bound
    k_parts: tuple | None = None
    note: str = ""

    def as_dict(self) -> dict:
        out = {"kind": self.kind, "bound": self.bound, "k": self.k, "T": self.T,
               "epsilon": self.epsilon, **self.inputs}
        if self.k_parts is not None:
            out["k_parts"] = list(self.k_parts)
        if self.note:
            out["note"] = self.note
        return out


def _require_pe(cert: PECertificate):
    if not cert.epsilon > 0:
        raise BoundError("not PE: the certificate has epsilon = 0")


def _windows(arg: float) -> int:
    if not math.isfinite(arg):
        raise BoundError("bound argument is not finite")
    return int(math.ceil(arg))


def theorem1_bound(x0_abs: float, p: float, cert: PECertificate) -> BoundReport:
    """Finite-time bound for the scalar single law with ``0 <= p < 1``.

    ``k = ceil(|x0|^(1-p) / ((1-p) T eps^(p+1)))`` windows.  ``x0 = 0`` gives
    ``k = 0``.
    """
    if not 0 <= p < 1:
        raise BoundError(f"finite-time bound needs 0 <= p < 1, got {p}")
    if x0_abs < 0:
        raise BoundError("|x0| must be >= 0")
    _require_pe(cert)
    T, eps = cert.T, cert.epsilon
    k = _windows(x0_abs ** (1 - p) / ((1 - p) * T * eps ** (p + 1))) if x0_abs > 0 else 0
    return BoundReport("finite_time", k * T, k, T, eps, {"x0_abs": x0_abs, "p": p})


def theorem2_escape_bound(c: float, p: float, cert: PECertificate) -> BoundReport:
    """Time to reach ``V <= c`` from any initial error, scalar single law with ``p > 1``."""
    if not p > 1:
        raise BoundError(f"escape bound needs p > 1, got {p}")
    if not c > 0:
        raise BoundError("level c must be > 0")
    _require_pe(cert)
    T, eps = cert.T, cert.epsilon
    a = (p - 1) / 2
    if math.isinf(c):
        k = 1
    else:
        k = max(1, _windows(1.0 / (2 ** a * (p - 1) * T * eps ** (p + 1) * c ** a)))
    return BoundReport("escape", k * T, k, T, eps, {"c": c, "p": p})


def _argmax(candidates, score):
    best, best_val = None, -math.inf
    for q in candidates:  # ascending, strict '>' keeps the smaller exponent on ties
        val = score(q)
        if val > best_val:
            best, best_val = q, val
    return best


def theorem3_fixed_time_bound(exponents, cert: PECertificate) -> BoundReport:
    """Fixed-time bound for the scalar composite law.

    Needs exponents below and above one; exponents equal to one are ignored
    here.  The lower exponent maximises ``(1-p) eps^(p+1)``, the upper one
    ``(p-1) eps^(p+1)``.  If another pair would give a smaller bound it is
    mentioned in ``note``.
    """
    exps = exponents if isinstance(exponents, ExponentSet) else ExponentSet.of(exponents)
    lower, upper = exps.below_one, exps.above_one
    if not lower or not upper:
        raise BoundError("not a fixed-time configuration: need exponents both below and above 1")
    _require_pe(cert)
    T, eps = cert.T, cert.epsilon

    def k_low(q):
        return _windows(1.0 / ((1 - q) * T * eps ** (q + 1)))

    def k_high(q):
        return _windows(1.0 / (2 ** ((q - 1) / 2) * (q - 1) * T * eps ** (q + 1)))

    p_lo = _argmax(lower, lambda q: (1 - q) * eps ** (q + 1))
    p_hi = _argmax(upper, lambda q: (q - 1) * eps ** (q + 1))
    k1, k2 = k_low(p_lo), k_high(p_hi)
    note = ""
    best1 = min(lower, key=k_low)
    best2 = min(upper, key=k_high)
    if k_low(best1) + k_high(best2) < k1 + k2:
        note = (f"exponents ({best1:g}, {best2:g}) give a smaller bound "
                f"{(k_low(best1) + k_high(best2)) * T:.6g}")
    return BoundReport("fixed_time", (k1 + k2) * T, k1 + k2, T, eps,
                       {"exponents": list(exps.exponents), "p_low": p_lo, "p_high": p_hi},
                       k_parts=(k1, k2), note=note)


def scalar_V_closed_form(V0: float, p: float, u_power_integral: float) -> float:
    """Exact ``V(t)`` of the scalar single law given ``I = int_t0^t |u|^(p+1)``.

    ``V^((1-p)/2)`` moves linearly in ``I`` with slope ``(p-1) 2^((p-1)/2)``;
    for ``p < 1`` it reaches zero in finite time and stays there.
    """
    if p < 0 or p == 1:
        raise ValueError("closed form needs p >= 0 and p != 1")
    if V0 < 0 or u_power_integral < 0:
        raise ValueError("V0 and the power integral must be >= 0")
    if V0 == 0:
        return 0.0
    base = V0 ** ((1 - p) / 2) + (p - 1) * 2 ** ((p - 1) / 2) * u_power_integral
    if base <= 0:
        return 0.0
    return base ** (2 / (1 - p))


def regressor_power_integral(signal, t0: float, t1: float, p: float,
                             subintervals: int = 20000) -> float:
    """``int_t0^t1 |u(s)|^(p+1) ds`` for a scalar regressor (composite Simpson)."""
    if subintervals % 2:
        subintervals += 1
    if t1 <= t0:
        return 0.0
    s = np.linspace(t0, t1, subintervals + 1)
    vals = np.abs(signal.eval(s)[:, 0]) ** (p + 1)
    return float(simpson(vals, dx=(t1 - t0) / subintervals))


def piecewise_z(z1: float, mu, p: float, dt: float) -> float:
    """Output error ``z = mu'x`` after ``dt`` seconds on a segment where ``u = mu``."""
    if p == 1 or not p > 0:
        raise ValueError("closed form needs p > 0 and p != 1")
    if dt < 0:
        raise ValueError("dt must be >= 0")
    m2 = float(np.dot(mu, mu))
    if not m2 > 0:
        raise ValueError("segment vector mu must be nonzero")
    if z1 == 0:
        return 0.0
    base = abs(z1) ** (1 - p) - (1 - p) * m2 * dt
    if base <= 0:
        return 0.0
    return math.copysign(base ** (1 / (1 - p)), z1)


def projection_step(x, mu) -> np.ndarray:
    """``(I - mu mu' / |mu|^2) x``."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    m2 = float(mu @ mu)
    if not m2 > 0:
        raise ValueError("cannot project along a zero vector")
    return x - mu * (float(mu @ x) / m2)


def piecewise_x(x1, mu, p: float, dwell: float) -> np.ndarray:
    """Estimation error after holding ``u = mu`` for ``dwell`` seconds.

    Once the segment is long enough for ``mu'x`` to reach zero the result
    is exactly the orthogonal projection of ``x1``.
    """
    x1 = np.asarray(x1, dtype=float)
    mu = np.asarray(mu, dtype=float)
    z1 = float(mu @ x1)
    z = piecewise_z(z1, mu, p, dwell)
    if z == 0.0:
        return projection_step(x1, mu)
    return x1 - mu * ((z1 - z) / float(mu @ mu))


def orthogonality_dwell(x, mu, p: float) -> float:
    """Shortest dwell after which ``mu'x`` is driven exactly to zero (``0 < p < 1``)."""
    if not 0 < p < 1:
        raise ValueError("finite-time orthogonalisation needs 0 < p < 1")
    mu = np.asarray(mu, dtype=float)
    z = abs(float(mu @ np.asarray(x, dtype=float)))
    return z ** (1 - p) / ((1 - p) * float(mu @ mu))


def orthogonality_ball_radius(u_min: float, p: float, dwell: float) -> float:
    """Radius of the ball of errors that any segment with ``|mu| >= u_min`` orthogonalises.

    Follows from ``|mu'x| <= |mu| |x|``: ``|x|^(1-p) <= (1-p) u_min^(p+1) dwell``.
    """
    if not 0 < p < 1:
        raise ValueError("finite-time orthogonalisation needs 0 < p < 1")
    return ((1 - p) * u_min ** (p + 1) * dwell) ** (1 / (1 - p))


@dataclass(frozen=True)
class ConvergenceClass:
    label: str  # finite_time | fixed_time | exponential | asymptotic | no_guarantee
    justification: str


def classify(spec: EstimatorSpec, n: int, cert: PECertificate) -> ConvergenceClass:
    if not cert.epsilon > 0:
        raise BoundError("not PE: the certificate has epsilon = 0")
    if isinstance(spec, Tracker):
        if n != 1:
            return ConvergenceClass("no_guarantee", "the tracker is a scalar algorithm")
        return ConvergenceClass("finite_time", "discontinuous tracker: exact tracking if L > gamma "
                                               "and u does not rest at zero")
    if n == 1:
        if isinstance(spec, Single):
            if spec.p < 1:
                return ConvergenceClass("finite_time", "scalar single law, 0 <= p < 1")
            if spec.p == 1:
                return ConvergenceClass("exponential", "linear gradient law under PE")
            return ConvergenceClass("asymptotic", "scalar single law, p > 1: uniform asymptotic "
                                                  "with escape from infinity")
        exps = spec.exponents
        if exps.p_min < 1 < exps.p_max:
            return ConvergenceClass("fixed_time", "scalar composite with exponents below and "
                                                  "above one")
        if exps.p_min < 1:
            return ConvergenceClass("finite_time", "scalar composite dominated by its p < 1 term "
                                                   "(comparison lemma)")
        if exps.p_min == 1:
            return ConvergenceClass("exponential", "scalar composite dominated by its linear term")
        return ConvergenceClass("asymptotic", "scalar composite with all exponents > 1")
    if isinstance(spec, Single):
        if spec.p == 0:
            return ConvergenceClass("no_guarantee", "p = 0 need not converge for n > 1")
        return ConvergenceClass("asymptotic", "vector single law, p > 0")
    exps = spec.exponents
    if exps.p_max <= exps.p_min + 1:
        return ConvergenceClass("asymptotic", f"vector composite, p_M={exps.p_max:g} <= "
                                              f"p_m+1={exps.p_min + 1:g}")
    return ConvergenceClass("no_guarantee", f"vector composite with p_M={exps.p_max:g} > "
                                            f"p_m+1={exps.p_min + 1:g}")


def tracker_gain_check(L: float, gamma: float) -> bool:
    """The tracker's Lyapunov derivative is negative iff ``L > gamma``."""
    if not L > 0 or gamma < 0:
        raise ValueError("need L > 0 and gamma >= 0")
    return L > gamma
