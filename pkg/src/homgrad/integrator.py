"""Fixed-step integration of the estimator dynamics.

The estimate is integrated against the measured output ``y = u' theta``;
the error ``x = theta_hat - theta`` is recovered afterwards from the true
parameter.  Regressor and parameter values at every stage time are
precomputed with numpy, the stepping loop itself runs on plain floats
(state dimensions here are 1 to a handful, where numpy per-call overhead
dominates).

No clamping: whatever the scheme produces near the non-Lipschitz
equilibrium is recorded as is.  Convergence is declared with a dwell
criterion on the recorded grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import Composite, EstimatorSpec, Single, Tracker, sign_delta

__all__ = [
    "IntegrationError",
    "NotApplicable",
    "IntegratorConfig",
    "Trajectory",
    "RateReport",
    "integrate",
    "lyapunov_rate_check",
    "convergence_time",
    "read_csv",
]


class IntegrationError(RuntimeError):
    """Raised when the integrated state stops being finite."""


class NotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 1e-4
    method: str = "rk4"
    conv_tol: float = 1e-9
    conv_dwell: float | None = None
    record_stride: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.step) and self.step > 0):
            raise ValueError(f"integration step must be > 0, got {self.step}")
        if self.method not in ("rk4", "euler"):
            raise ValueError(f"unknown integration method {self.method!r} (use 'rk4' or 'euler')")
        if not self.conv_tol > 0:
            raise ValueError("conv_tol must be > 0")
        if self.conv_dwell is not None and self.conv_dwell < self.step:
            raise ValueError("conv_dwell must be at least one integration step")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")


@dataclass
class Trajectory:
    times: np.ndarray
    theta_hat: np.ndarray
    x: np.ndarray
    e: np.ndarray
    V: np.ndarray
    converged_at: float | None = None
    # last recorded time with ||x|| >= conv_tol before converged_at
    last_above: float | None = None
    constant_parameter: bool = True
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.x.shape[1]

    @property
    def x_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.x * self.x, axis=1))

    @property
    def theta(self) -> np.ndarray:
        return self.theta_hat - self.x

    def hit_interval(self):
        """Bracket ``[last time above tol, converged_at]`` for the finite-time hit."""
        if self.converged_at is None:
            return None
        return (self.last_above if self.last_above is not None else self.converged_at,
                self.converged_at)

    def first_time_below_V(self, level: float):
        idx = np.flatnonzero(self.V <= level)
        return float(self.times[idx[0]]) if idx.size else None

    def at(self, t: float) -> int:
        """Index of the recorded sample closest to ``t``."""
        return int(np.argmin(np.abs(self.times - t)))

    def header(self) -> list:
        n = self.dimension
        return (["t"] + [f"x_{i + 1}" for i in range(n)] + ["e", "V"]
                + [f"theta_hat_{i + 1}" for i in range(n)])

    def to_csv(self, path) -> None:
        table = np.column_stack([self.times, self.x, self.e, self.V, self.theta_hat])
        np.savetxt(path, table, fmt="%.17g", delimiter=",", header=",".join(self.header()),
                   comments="")


def read_csv(path) -> Trajectory:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    n = sum(1 for h in header if h.startswith("x_"))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(times=data[:, 0], x=data[:, 1:1 + n], e=data[:, 1 + n], V=data[:, 2 + n],
                      theta_hat=data[:, 3 + n:3 + 2 * n])


def convergence_time(times: np.ndarray, norms: np.ndarray, tol: float, dwell: float):
    """First recorded time after which ``norms < tol`` holds for at least ``dwell``.

    Returns ``(converged_at, last_above)`` or ``(None, None)``.
    """
    below = norms < tol
    if not below.any():
        return None, None
    padded = np.concatenate([[False], below, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, stops = edges[::2], edges[1::2] - 1
    slack = 1e-9 * max(1.0, dwell)
    for s, e in zip(starts, stops):
        if times[e] - times[s] >= dwell - slack:
            return float(times[s]), float(times[s - 1]) if s > 0 else None
    return None, None


def _gain_function(spec: EstimatorSpec):
    if isinstance(spec, Single):
        p = spec.p
        if p == 1.0:
            return lambda e: e

        def gain(e):
            if e == 0.0:
                return 0.0
            return math.copysign(abs(e) ** p, e)
        return gain
    if isinstance(spec, Composite):
        ps = tuple(spec.exponents)

        def gain(e):
            if e == 0.0:
                return 0.0
            a = abs(e)
            return math.copysign(sum(a ** p for p in ps), e)
        return gain
    if isinstance(spec, Tracker):
        d = spec.delta

        def gain(e):
            if e >= d:
                return 1.0
            if e <= -d:
                return -1.0
            return e / d
        return gain
    raise TypeError(f"unknown estimator spec {spec!r}")


def _direction(spec, U):
    """Vector multiplying the gain: ``u`` itself, or ``L sign_d(u)`` for the tracker."""
    if isinstance(spec, Tracker):
        return spec.L * sign_delta(U, spec.delta)
    return U


def _step_count(horizon: float, h: float) -> int:
    n = int(round(horizon / h))
    if n < 1 or abs(n * h - horizon) > 1e-9 * max(horizon, h):
        n = int(math.ceil(horizon / h))
    return n


def _overflow(k, h, state):
    norm = math.sqrt(sum(v * v for v in state)) if all(math.isfinite(v) for v in state) else math.inf
    return IntegrationError(f"non-finite state at step {k} (t={k * h:.6g}): |theta_hat| = {norm}")


def _scalar_loop(theta, gain, h, rk4, stride, u0, g0, y0, um, gm, ym, u1, g1, y1):
    n_steps = len(u0)
    rec = [theta]
    h2 = 0.5 * h
    h6 = h / 6.0
    try:
        for k in range(n_steps):
            a = u0[k]
            k1 = -gain(a * theta - y0[k]) * g0[k]
            if rk4:
                a = um[k]
                k2 = -gain(a * (theta + h2 * k1) - ym[k]) * gm[k]
                k3 = -gain(a * (theta + h2 * k2) - ym[k]) * gm[k]
                k4 = -gain(u1[k] * (theta + h * k3) - y1[k]) * g1[k]
                theta = theta + h6 * (k1 + 2.0 * (k2 + k3) + k4)
            else:
                theta = theta + h * k1
            if not math.isfinite(theta):
                raise _overflow(k + 1, h, [theta])
            if (k + 1) % stride == 0 or k + 1 == n_steps:
                rec.append(theta)
    except OverflowError:
        raise _overflow(k + 1, h, [math.inf]) from None
    return [[v] for v in rec]


def _vector_loop(theta, gain, h, rk4, stride, u0, g0, y0, um, gm, ym, u1, g1, y1):
    n_steps = len(u0)
    n = len(theta)
    idx = range(n)
    rec = [list(theta)]
    h2 = 0.5 * h
    h6 = h / 6.0
    th = list(theta)
    try:
        for k in range(n_steps):
            a, g = u0[k], g0[k]
            c1 = -gain(sum(a[i] * th[i] for i in idx) - y0[k])
            if rk4:
                a, g2 = um[k], gm[k]
                c2 = -gain(sum(a[i] * (th[i] + h2 * c1 * g[i]) for i in idx) - ym[k])
                c3 = -gain(sum(a[i] * (th[i] + h2 * c2 * g2[i]) for i in idx) - ym[k])
                a, g4 = u1[k], g1[k]
                c4 = -gain(sum(a[i] * (th[i] + h * c3 * g2[i]) for i in idx) - y1[k])
                th = [th[i] + h6 * (c1 * g[i] + 2.0 * (c2 + c3) * g2[i] + c4 * g4[i]) for i in idx]
            else:
                th = [th[i] + h * c1 * g[i] for i in idx]
            if not all(math.isfinite(v) for v in th):
                raise _overflow(k + 1, h, th)
            if (k + 1) % stride == 0 or k + 1 == n_steps:
                rec.append(th)
    except OverflowError:
        raise _overflow(k + 1, h, [math.inf]) from None
    return rec


def integrate(scenario, spec: EstimatorSpec, config: IntegratorConfig | None = None,
              label: str = "") -> Trajectory:
    """Integrate one estimator over ``[0, scenario.horizon]``.

    ``scenario`` needs ``regressor``, ``parameter``, ``theta_hat0``,
    ``horizon`` and optionally ``t0_offset`` and ``pe_T`` (default dwell for
    the convergence test).
    """
    config = config or IntegratorConfig()
    offset = float(getattr(scenario, "t0_offset", 0.0) or 0.0)
    u_sig = scenario.regressor
    th_sig = scenario.parameter
    if offset:
        u_sig = u_sig.shifted(offset)
        th_sig = th_sig.shifted(offset)
    n = u_sig.dimension
    theta0 = np.atleast_1d(np.asarray(scenario.theta_hat0, dtype=float))
    if theta0.shape != (n,) or th_sig.dimension != n:
        raise ValueError(f"dimension mismatch: regressor n={n}, theta_hat0 {theta0.shape}, "
                         f"parameter n={th_sig.dimension}")
    if isinstance(spec, Tracker) and n != 1:
        raise ValueError("the tracker is defined for scalar problems only (n = 1)")
    horizon = float(scenario.horizon)
    if not horizon > 0:
        raise ValueError("horizon must be > 0")

    h = config.step
    n_steps = _step_count(horizon, h)
    t = h * np.arange(n_steps + 1)
    rk4 = config.method == "rk4"

    def stage(times, left=False):
        U = u_sig.eval(times, left=left)
        Y = np.sum(U * th_sig.eval(times), axis=1)
        return U, _direction(spec, U), Y

    U0, G0, Y0 = stage(t[:-1])
    if rk4:
        Um, Gm, Ym = stage(t[:-1] + 0.5 * h)
        U1, G1, Y1 = stage(t[1:], left=True)
    else:
        Um = Gm = Ym = U1 = G1 = Y1 = U0

    gain = _gain_function(spec)
    stride = int(config.record_stride)
    if n == 1:
        arrays = [A[:, 0].tolist() if A.ndim == 2 else A.tolist()
                  for A in (U0, G0, Y0, Um, Gm, Ym, U1, G1, Y1)]
        rec = _scalar_loop(float(theta0[0]), gain, h, rk4, stride, *arrays)
    else:
        arrays = [A.tolist() for A in (U0, G0, Y0, Um, Gm, Ym, U1, G1, Y1)]
        rec = _vector_loop(theta0.tolist(), gain, h, rk4, stride, *arrays)

    rec_idx = np.arange(0, n_steps + 1, stride)
    if rec_idx[-1] != n_steps:
        rec_idx = np.append(rec_idx, n_steps)
    times = t[rec_idx]
    theta_hat = np.array(rec, dtype=float)
    x = theta_hat - th_sig.eval(times)
    e = np.sum(u_sig.eval(times) * x, axis=1)
    V = 0.5 * np.sum(x * x, axis=1)

    dwell = config.conv_dwell
    if dwell is None:
        dwell = getattr(scenario, "pe_T", None) or h
    converged_at, last_above = convergence_time(times, np.sqrt(2.0 * V), config.conv_tol, dwell)
    meta = {"step": h, "method": config.method, "conv_tol": config.conv_tol, "conv_dwell": dwell,
            "t0_offset": offset}
    if isinstance(spec, Tracker):
        meta["delta"] = spec.delta
    return Trajectory(times=times, theta_hat=theta_hat, x=x, e=e, V=V, converged_at=converged_at,
                      last_above=last_above, constant_parameter=th_sig.is_constant,
                      label=label, meta=meta)


@dataclass
class RateReport:
    passed: bool
    worst_violation: float
    worst_index: int | None

    def __str__(self):
        if self.passed:
            return f"pass: V non-increasing (worst excess {self.worst_violation:.3e})"
        return f"FAIL: V increased by {self.worst_violation:.3e} at sample {self.worst_index}"


def lyapunov_rate_check(traj: Trajectory) -> RateReport:
    """Check ``V[k+1] <= V[k] + 1e-9 * max(1, V[k])`` along a constant-parameter run."""
    if not traj.constant_parameter:
        raise NotApplicable("not applicable: V need not decrease when the parameter varies")
    V = traj.V
    if V.size < 2:
        return RateReport(True, 0.0, None)
    excess = (V[1:] - V[:-1]) - 1e-9 * np.maximum(1.0, V[:-1])
    k = int(np.argmax(excess))
    worst = float(V[k + 1] - V[k])
    return RateReport(bool(excess[k] <= 0), worst, None if excess[k] <= 0 else k)
