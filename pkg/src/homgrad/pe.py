"""Numerical persistence-of-excitation certificates.

A regressor ``u`` is PE with window ``T`` and level ``eps`` when every window
average ``(1/T) int_t^{t+T} |u(s)'w| ds`` is at least ``eps`` for every unit
``w``.  :func:`certify` evaluates that average on a finite set of window
starts and a deterministic grid of unit directions, then shrinks the minimum
by :data:`CONSERVATISM` so that grid and quadrature error stay on the safe
side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .signals import VectorSignal, sup_bound

__all__ = [
    "CONSERVATISM",
    "PECertificate",
    "PropositionReport",
    "certify",
    "power_bound",
    "sphere_grid",
    "verify_power_inequality",
    "verify_proposition1",
    "window_average",
    "window_power_integral",
]

CONSERVATISM = 0.99
NOT_PE_THRESHOLD = 1e-9
DEFAULT_SUBINTERVALS = 2000


@dataclass(frozen=True)
class PECertificate:
    T: float
    epsilon: float
    u_M: float
    horizon: float | None = None
    sphere_resolution: int = 0
    window_step: float = 0.0
    raw_epsilon: float | None = None
    subintervals: int = DEFAULT_SUBINTERVALS
    witness: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"PE window T must be > 0, got {self.T}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.epsilon > self.u_M * (1 + 1e-12):
            raise ValueError(f"epsilon={self.epsilon} exceeds the regressor bound u_M={self.u_M}")
        if self.horizon is None:
            object.__setattr__(self, "horizon", float(self.T))
        elif self.T > self.horizon * (1 + 1e-12):
            raise ValueError("PE window T must not exceed the certification horizon")
        if self.raw_epsilon is None:
            object.__setattr__(self, "raw_epsilon", self.epsilon)

    @property
    def is_pe(self) -> bool:
        return self.epsilon > 0

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "raw_epsilon": self.raw_epsilon,
            "epsilon": self.epsilon,
            "conservatism": CONSERVATISM,
            "u_M": self.u_M,
            "horizon": self.horizon,
            "sphere_resolution": self.sphere_resolution,
            "window_step": self.window_step,
            "subintervals": self.subintervals,
            "is_pe": self.is_pe,
            "witness_t": None if self.witness is None else self.witness[0],
            "witness_w": None if self.witness is None else list(self.witness[1]),
        }


def sphere_grid(n: int, resolution: int) -> np.ndarray:
    """Deterministic unit directions, one per row.

    Only one of ``w`` and ``-w`` is needed since ``|u'w|`` is even in ``w``.
    n=1: ``{+1, -1}``; n=2: ``resolution`` angles over ``[0, pi)``; n=3: a
    Fibonacci lattice of ``2 * resolution**2`` points on the sphere; n>3: a
    hyperspherical angle grid with ``resolution`` values per angle.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if resolution < 1:
        raise ValueError("sphere resolution must be >= 1")
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        a = np.pi * np.arange(resolution) / resolution
        return np.column_stack([np.cos(a), np.sin(a)])
    if n == 3:
        m = 2 * resolution * resolution
        k = np.arange(m) + 0.5
        z = 1.0 - 2.0 * k / m
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (3.0 - math.sqrt(5.0)) * k
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    polar = np.linspace(0.0, np.pi, resolution)
    azim = 2 * np.pi * np.arange(resolution) / resolution
    grids = np.meshgrid(*([polar] * (n - 2) + [azim]), indexing="ij")
    angles = np.stack([g.ravel() for g in grids], axis=1)
    out = np.ones((angles.shape[0], n))
    for j in range(n - 1):
        out[:, j] *= np.cos(angles[:, j])
        out[:, j + 1:] *= np.sin(angles[:, j])[:, None]
    return out


def _window_nodes(start: float, T: float, subintervals: int) -> np.ndarray:
    return start + np.linspace(0.0, T, subintervals + 1)


def window_average(signal: VectorSignal, start: float, T: float, directions,
                   subintervals: int = DEFAULT_SUBINTERVALS) -> np.ndarray:
    """``(1/T) int_start^{start+T} |u'w| ds`` for each row ``w`` of ``directions``."""
    return window_power_integral(signal, start, T, directions, 0.0, subintervals) / T


def window_power_integral(signal: VectorSignal, start: float, T: float, directions, p: float,
                          subintervals: int = DEFAULT_SUBINTERVALS) -> np.ndarray:
    """``int_start^{start+T} |u'w|^(p+1) ds`` by composite Simpson, per direction."""
    if subintervals % 2:
        subintervals += 1
    W = np.atleast_2d(np.asarray(directions, dtype=float))
    U = signal.eval(_window_nodes(start, T, subintervals))
    vals = np.abs(U @ W.T)
    if p != 0:
        vals = vals ** (p + 1)
    return simpson(vals, dx=T / subintervals, axis=0)


def certify(signal: VectorSignal, T: float, horizon: float, sphere_resolution: int = 16,
            window_step: float | None = None,
            subintervals: int = DEFAULT_SUBINTERVALS) -> PECertificate:
    """Certify PE of ``signal`` with window ``T`` over window starts in ``[0, horizon - T]``.

    The certificate's ``epsilon`` is ``CONSERVATISM`` times the smallest
    window average found (``raw_epsilon``).  A minimum below ``1e-9`` yields
    ``epsilon = 0``: the signal is reported as not PE at this ``T``.
    """
    if not T > 0:
        raise ValueError("T must be > 0")
    if window_step is None:
        window_step = T / 16
    if not window_step > 0:
        raise ValueError("window_step must be > 0")
    if horizon < T + window_step * (1 - 1e-12):
        raise ValueError(f"horizon must be at least T + window_step = {T + window_step}")
    if sphere_resolution < 8:
        raise ValueError("sphere_resolution must be >= 8")
    if subintervals < 2000:
        raise ValueError("at least 2000 Simpson subintervals per window are required")

    grid = sphere_grid(signal.dimension, sphere_resolution)
    n_windows = int(math.floor((horizon - T) / window_step * (1 + 1e-12))) + 1
    starts = window_step * np.arange(n_windows)

    best = math.inf
    witness = None
    for start in starts:
        avg = window_average(signal, float(start), T, grid, subintervals)
        j = int(np.argmin(avg))
        if avg[j] < best:
            best = float(avg[j])
            witness = (float(start), tuple(float(v) for v in grid[j]))

    u_M = sup_bound(signal, horizon)
    if best < NOT_PE_THRESHOLD:
        eps = 0.0
    else:
        eps = CONSERVATISM * best
    return PECertificate(T=float(T), epsilon=eps, u_M=u_M, horizon=float(horizon),
                         sphere_resolution=sphere_resolution, window_step=float(window_step),
                         raw_epsilon=best, subintervals=subintervals, witness=witness)


def power_bound(cert: PECertificate, p: float) -> float:
    """Lower bound ``T * eps^(p+1)`` on the windowed integral of ``|u'w|^(p+1)``."""
    if p < 0:
        raise ValueError("p must be >= 0")
    return cert.T * cert.epsilon ** (p + 1)


@dataclass
class PropositionReport:
    passed: bool
    trials: int
    p: float
    worst_margin: float
    witness: tuple
    tolerance: float

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        t, w = self.witness
        return (f"{status}: p={self.p:g}, {self.trials} trials, worst margin {self.worst_margin:.3e} "
                f"at t={t:.6g}, w={np.round(w, 6).tolist()}")


def verify_power_inequality(signal: VectorSignal, cert: PECertificate, p: float,
                            samples, tolerance: float | None = None) -> PropositionReport:
    """Check the power-integral bound on explicit ``(start, w)`` samples."""
    if p < 0:
        raise ValueError("p must be >= 0")
    bound = power_bound(cert, p)
    if tolerance is None:
        tolerance = 1e-6 * cert.T * max(cert.u_M, 1.0) ** (p + 1)
    worst = math.inf
    witness = None
    count = 0
    for start, w in samples:
        w = np.atleast_1d(np.asarray(w, dtype=float))
        w = w / np.linalg.norm(w)
        value = float(window_power_integral(signal, start, cert.T, w, p, cert.subintervals)[0])
        margin = value - bound
        count += 1
        if margin < worst:
            worst = margin
            witness = (float(start), tuple(float(v) for v in w))
    return PropositionReport(passed=worst >= -tolerance, trials=count, p=float(p),
                             worst_margin=worst, witness=witness, tolerance=tolerance)


def verify_proposition1(signal: VectorSignal, cert: PECertificate, p: float, trials: int = 100,
                        seed: int = 0, tolerance: float | None = None) -> PropositionReport:
    """Sample random windows and unit directions and check
    ``int |u'w|^(p+1) >= T eps^(p+1) - tolerance``.

    The default tolerance, ``1e-6 * T * max(u_M, 1)^(p+1)``, covers Simpson
    error on smooth signals.
    """
    rng = np.random.default_rng(seed)
    n = signal.dimension
    span = max(cert.horizon - cert.T, 0.0)
    samples = []
    for _ in range(trials):
        start = float(rng.uniform(0.0, span)) if span > 0 else 0.0
        w = rng.standard_normal(n)
        while not np.linalg.norm(w) > 0:
            w = rng.standard_normal(n)
        samples.append((start, w))
    return verify_power_inequality(signal, cert, p, samples, tolerance)
