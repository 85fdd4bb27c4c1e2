"""Regressor and parameter signals.

Two families cover everything the estimators are driven with:

* sums of sinusoids and constants, one sum per vector component;
* piecewise-constant sequences of vectors with per-segment dwell times,
  either cycling or holding the last vector once the sequence ends.

Signals are frozen value objects.  Every check happens in ``__post_init__``
so evaluation never has to validate anything.  ``eval`` accepts a scalar
time (returns shape ``(n,)``) or a 1-D array of times (returns ``(m, n)``).
Piecewise sequences are right-continuous; ``left=True`` gives the left
limit, which the integrator uses for the last stage of a step that ends on
a breakpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Constant",
    "Sinusoid",
    "ScalarSignal",
    "SinusoidVector",
    "PiecewiseConstant",
    "ParameterSignal",
    "VectorSignal",
    "SignalError",
    "scalar",
    "vector",
    "sup_bound",
    "orthogonal_sequence",
]

# Breakpoint snapping, relative to the shortest dwell.
_SNAP = 1e-9


class SignalError(ValueError):
    """Raised when a signal is constructed with inconsistent data."""


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise SignalError(f"constant term must be finite, got {self.value!r}")

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.value)

    def rate(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def shifted(self, offset: float) -> "Constant":
        return self


@dataclass(frozen=True)
class Sinusoid:
    """``amplitude * cos(angular_frequency * t + phase)``."""

    amplitude: float
    angular_frequency: float
    phase: float = 0.0

    def __post_init__(self):
        for name in ("amplitude", "angular_frequency", "phase"):
            if not math.isfinite(getattr(self, name)):
                raise SignalError(f"sinusoid {name} must be finite")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.cos(self.angular_frequency * t + self.phase)

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        w = self.angular_frequency
        return -self.amplitude * w * np.sin(w * t + self.phase)

    def shifted(self, offset: float) -> "Sinusoid":
        return Sinusoid(self.amplitude, self.angular_frequency,
                        self.phase + self.angular_frequency * offset)


SignalTerm = Union[Constant, Sinusoid]


@dataclass(frozen=True)
class ScalarSignal:
    """Sum of constant and sinusoid terms."""

    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise SignalError("a scalar signal needs at least one term")
        for term in self.terms:
            if not isinstance(term, (Constant, Sinusoid)):
                raise SignalError(f"unsupported signal term {term!r}")

    def __call__(self, t):
        out = self.terms[0](t)
        for term in self.terms[1:]:
            out = out + term(t)
        return out

    def rate(self, t):
        out = self.terms[0].rate(t)
        for term in self.terms[1:]:
            out = out + term.rate(t)
        return out

    def bound(self) -> float:
        total = 0.0
        for term in self.terms:
            total += abs(term.value) if isinstance(term, Constant) else abs(term.amplitude)
        return total

    def rate_bound(self) -> float:
        return sum(abs(term.amplitude * term.angular_frequency)
                   for term in self.terms if isinstance(term, Sinusoid))

    def shifted(self, offset: float) -> "ScalarSignal":
        return ScalarSignal(tuple(term.shifted(offset) for term in self.terms))


def _check_time(t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("signals are only defined for t >= 0")


@dataclass(frozen=True)
class SinusoidVector:
    """Vector signal whose components are independent :class:`ScalarSignal` sums."""

    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise SignalError("vector signal needs at least one component")
        for comp in self.components:
            if not isinstance(comp, ScalarSignal):
                raise SignalError(f"component {comp!r} is not a ScalarSignal")

    @property
    def dimension(self) -> int:
        return len(self.components)

    def eval(self, t, left: bool = False) -> np.ndarray:
        _check_time(t)
        return np.stack([np.asarray(c(t), dtype=float) for c in self.components], axis=-1)

    def rate(self, t) -> np.ndarray:
        return np.stack([np.asarray(c.rate(t), dtype=float) for c in self.components], axis=-1)

    def sup_bound(self, horizon: float) -> float:
        return float(math.sqrt(sum(c.bound() ** 2 for c in self.components)))

    def rate_bound(self) -> float:
        return float(math.sqrt(sum(c.rate_bound() ** 2 for c in self.components)))

    def shifted(self, offset: float) -> "SinusoidVector":
        return SinusoidVector(tuple(c.shifted(offset) for c in self.components))


@dataclass(frozen=True)
class PiecewiseConstant:
    """Sequence of constant vectors ``vectors[k]`` held for ``dwells[k]`` seconds.

    With ``cycle`` the sequence repeats; otherwise the last vector is held
    forever.  ``offset`` shifts the time origin (``u(t) = seq(t + offset)``).
    """

    vectors: np.ndarray
    dwells: tuple
    cycle: bool = True
    offset: float = 0.0
    _ends: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vecs = np.array(self.vectors, dtype=float)
        if vecs.ndim == 1:
            vecs = vecs[:, None]
        if vecs.ndim != 2 or vecs.shape[0] == 0:
            raise SignalError("piecewise signal needs a non-empty list of equal-length vectors")
        dwells = np.broadcast_to(np.asarray(self.dwells, dtype=float), (vecs.shape[0],))
        if not np.all(np.isfinite(vecs)):
            raise SignalError("piecewise vectors must be finite")
        if not np.all(dwells > 0) or not np.all(np.isfinite(dwells)):
            raise SignalError("every dwell time must be finite and > 0")
        if not math.isfinite(self.offset) or self.offset < 0:
            raise SignalError("offset must be finite and >= 0")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "dwells", tuple(float(d) for d in dwells))
        ends = np.cumsum(dwells)
        ends.setflags(write=False)
        object.__setattr__(self, "_ends", ends)

    def __eq__(self, other):
        if not isinstance(other, PiecewiseConstant):
            return NotImplemented
        return (np.array_equal(self.vectors, other.vectors) and self.dwells == other.dwells
                and self.cycle == other.cycle and self.offset == other.offset)

    def __hash__(self):
        return hash((self.vectors.tobytes(), self.dwells, self.cycle, self.offset))

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    @property
    def period(self) -> float:
        return float(self._ends[-1])

    def segment_index(self, t, left: bool = False) -> np.ndarray:
        """Index of the active segment at ``t`` (left limit if ``left``)."""
        s = np.asarray(t, dtype=float) + self.offset
        tol = _SNAP * min(self.dwells)
        ends = self._ends
        last = len(ends) - 1
        if self.cycle:
            P = ends[-1]
            if left:
                k = np.ceil((s - tol) / P) - 1
            else:
                k = np.floor((s + tol) / P)
            s = s - np.maximum(k, 0) * P
        if left:
            idx = np.searchsorted(ends, s - tol, side="left")
        else:
            idx = np.searchsorted(ends, s + tol, side="right")
        return np.minimum(idx, last)

    def eval(self, t, left: bool = False) -> np.ndarray:
        _check_time(t)
        return self.vectors[self.segment_index(t, left=left)]

    def rate(self, t) -> np.ndarray:
        return np.zeros_like(self.eval(t))

    def breakpoints(self, horizon: float) -> np.ndarray:
        """Jump times in ``(0, horizon]`` (in signal time, i.e. after the offset)."""
        if self.cycle:
            reps = int(math.ceil((horizon + self.offset) / self.period)) + 1
            ends = (np.arange(reps)[:, None] * self.period + self._ends[None, :]).ravel()
        else:
            ends = self._ends[:-1]
        ends = ends - self.offset
        return ends[(ends > 0) & (ends <= horizon * (1 + 1e-15))]

    def sup_bound(self, horizon: float) -> float:
        times = np.concatenate([[0.0], self.breakpoints(horizon)])
        visited = np.unique(self.segment_index(times))
        return float(np.max(np.linalg.norm(self.vectors[visited], axis=1)))

    def shifted(self, offset: float) -> "PiecewiseConstant":
        return PiecewiseConstant(self.vectors, self.dwells, self.cycle, self.offset + offset)


VectorSignal = Union[SinusoidVector, PiecewiseConstant]


def scalar(*terms) -> ScalarSignal:
    """Build a scalar signal.  Plain numbers become constants, tuples
    ``(amplitude, frequency[, phase])`` become cosines."""
    out = []
    for term in terms:
        if isinstance(term, (Constant, Sinusoid)):
            out.append(term)
        elif isinstance(term, (int, float)):
            out.append(Constant(float(term)))
        else:
            out.append(Sinusoid(*map(float, term)))
    return ScalarSignal(tuple(out))


def vector(*components) -> SinusoidVector:
    """Build a :class:`SinusoidVector` from ScalarSignals or term lists."""
    comps = []
    for comp in components:
        if isinstance(comp, ScalarSignal):
            comps.append(comp)
        elif isinstance(comp, (list, tuple)):
            comps.append(scalar(*comp))
        else:
            comps.append(scalar(comp))
    return SinusoidVector(tuple(comps))


def sup_bound(signal: VectorSignal, horizon: float) -> float:
    """Upper bound u_M on ``||u(t)||`` over ``[0, horizon]``.

    Sinusoid sums use the Euclidean norm of the per-component sums of
    absolute amplitudes; piecewise sequences use the largest visited
    segment norm.
    """
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    return signal.sup_bound(horizon)


def orthogonal_sequence(vectors: Sequence[Sequence[float]], dwell: float,
                        cycle: bool = True) -> PiecewiseConstant:
    """Cycle through mutually orthogonal vectors, each held for ``dwell`` seconds."""
    vecs = np.array(vectors, dtype=float)
    if vecs.ndim != 2 or vecs.shape[0] == 0:
        raise SignalError("need a non-empty list of equal-length vectors")
    if vecs.shape[0] > vecs.shape[1]:
        raise SignalError(f"at most {vecs.shape[1]} mutually orthogonal vectors exist in "
                          f"R^{vecs.shape[1]}, got {vecs.shape[0]}")
    norms = np.linalg.norm(vecs, axis=1)
    if np.any(norms == 0):
        raise SignalError("orthogonal sequence contains a zero vector")
    gram = vecs @ vecs.T
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            if abs(gram[i, j]) > 1e-12 * norms[i] * norms[j]:
                raise SignalError(f"vectors {i} and {j} are not orthogonal "
                                  f"(inner product {gram[i, j]:.3g})")
    return PiecewiseConstant(vecs, (float(dwell),) * len(vecs), cycle=cycle)


@dataclass(frozen=True)
class ParameterSignal:
    """True parameter: a constant vector or a sinusoid-sum signal with rate bound ``gamma``."""

    constant: np.ndarray | None = None
    signal: SinusoidVector | None = None
    gamma: float | None = None

    def __post_init__(self):
        if (self.constant is None) == (self.signal is None):
            raise SignalError("parameter is either a constant vector or a signal, not both")
        if self.constant is not None:
            c = np.atleast_1d(np.array(self.constant, dtype=float))
            if c.ndim != 1 or not np.all(np.isfinite(c)):
                raise SignalError("constant parameter must be a finite vector")
            c.setflags(write=False)
            object.__setattr__(self, "constant", c)
            gamma = 0.0 if self.gamma is None else float(self.gamma)
        else:
            if not isinstance(self.signal, SinusoidVector):
                raise SignalError("time-varying parameters must be sinusoid/constant sums")
            gamma = self.signal.rate_bound() if self.gamma is None else float(self.gamma)
        if not gamma >= 0:
            raise SignalError(f"rate bound gamma must be >= 0, got {gamma}")
        object.__setattr__(self, "gamma", gamma)

    def __eq__(self, other):
        if not isinstance(other, ParameterSignal):
            return NotImplemented
        same = (self.signal == other.signal and self.gamma == other.gamma)
        if self.constant is None or other.constant is None:
            return same and self.constant is other.constant
        return same and np.array_equal(self.constant, other.constant)

    __hash__ = None

    @property
    def is_constant(self) -> bool:
        return self.constant is not None

    @property
    def dimension(self) -> int:
        return len(self.constant) if self.is_constant else self.signal.dimension

    def eval(self, t) -> np.ndarray:
        if self.is_constant:
            t = np.asarray(t, dtype=float)
            return np.broadcast_to(self.constant, t.shape + self.constant.shape).copy()
        return self.signal.eval(t)

    def rate(self, t) -> np.ndarray:
        if self.is_constant:
            return np.zeros_like(self.eval(t))
        return self.signal.rate(t)

    def shifted(self, offset: float) -> "ParameterSignal":
        if self.is_constant:
            return self
        return ParameterSignal(signal=self.signal.shifted(offset), gamma=self.gamma)
