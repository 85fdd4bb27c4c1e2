"""Scenario files.

A scenario is an INI-style text file (read with :mod:`configparser`)::

    [scenario]
    name = scalar_decay
    dimension = 1
    horizon = 20
    theta_hat0 = 0
    t0_offset = 0            ; optional, shifts every signal: u(t) -> u(t + offset)
    escape_level = 1         ; optional, level c used for escape bounds

    [regressor]
    u1 = cos(2, 2)           ; amplitude, angular frequency[, phase]; terms joined by '+'

    [parameter]
    value = 5                ; constant parameter, comma separated for vectors

    [estimator.p075]
    kind = single
    p = 3/4

    [integrator]
    step = 1e-4
    record_stride = 10

    [pe]
    T = pi/2
    window_step = pi/32

    [outputs]
    csv_path = out/scalar_decay
    plot_data = true

Numbers may be written as arithmetic on literals, ``pi`` and ``sqrt(...)``.
A piecewise-constant regressor replaces the ``uN`` lines by::

    type = piecewise
    vectors = 1, 1, 0; 1, -1, 0; 0, 0, 1
    dwell = 1
    cycle = true

A time-varying parameter replaces ``value`` by ``theta1 = cos(1, 3) + const(-4)``
lines and an optional ``gamma`` rate bound.  Estimator kinds are
``single`` (``p``), ``composite`` (``exponents = 3/4, 3/2``) and
``tracker`` (``L``, ``delta``).
"""

from __future__ import annotations

import ast
import configparser
import math
import operator
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .estimators import Composite, EstimatorError, ExponentSet, Single, Tracker, DEFAULT_DELTA
from .integrator import IntegratorConfig
from .signals import (Constant, ParameterSignal, PiecewiseConstant, ScalarSignal, Sinusoid,
                      SignalError, SinusoidVector)

__all__ = [
    "ScenarioError",
    "PESettings",
    "OutputSettings",
    "ScenarioConfig",
    "load_scenario",
    "loads_scenario",
    "dumps_scenario",
    "bundled_scenario",
    "number",
]

SECTIONS = ("scenario", "regressor", "parameter", "integrator", "pe", "outputs")


class ScenarioError(ValueError):
    """Invalid scenario file; the message names the section and key."""


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sqrt": math.sqrt, "cos": math.cos, "sin": math.sin, "exp": math.exp, "log": math.log}
_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        v = _eval_node(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
            and len(node.args) == 1 and not node.keywords):
        return _FUNCS[node.func.id](_eval_node(node.args[0]))
    raise ValueError("unsupported expression")


def number(text: str) -> float:
    """Parse a number written as a small arithmetic expression (``3/4``, ``pi/2``, ``sqrt(2)``)."""
    try:
        return float(_eval_node(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError, OverflowError):
        raise ValueError(f"not a number: {text!r}") from None


def _split_top(text: str, sep: str) -> list:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


_TERM = re.compile(r"^(cos|const)\s*\((.*)\)$", re.S)


def _parse_term(text: str):
    m = _TERM.match(text.strip())
    if not m:
        return Constant(number(text))
    kind, body = m.group(1), m.group(2)
    args, kwargs = [], {}
    for item in _split_top(body, ","):
        if "=" in item:
            key, val = item.split("=", 1)
            kwargs[key.strip()] = number(val)
        else:
            args.append(number(item))
    if kind == "const":
        if len(args) + len(kwargs) != 1:
            raise ValueError("const() takes exactly one value")
        return Constant(args[0] if args else kwargs.pop("value", kwargs.pop("c", math.nan)))
    names = ["amplitude", "frequency", "phase"]
    vals = dict(zip(names, args))
    for key, val in kwargs.items():
        if key not in names:
            raise ValueError(f"unknown cos() argument {key!r}")
        vals[key] = val
    if "amplitude" not in vals or "frequency" not in vals:
        raise ValueError("cos() needs an amplitude and a frequency")
    return Sinusoid(vals["amplitude"], vals["frequency"], vals.get("phase", 0.0))


def parse_scalar_signal(text: str) -> ScalarSignal:
    """``cos(2, 2) + const(1.5)``; leading minus signs belong to the amplitudes."""
    return ScalarSignal(tuple(_parse_term(t) for t in _split_top(text, "+")))


def _fmt(x: float) -> str:
    return repr(float(x))


def format_scalar_signal(sig: ScalarSignal) -> str:
    out = []
    for term in sig.terms:
        if isinstance(term, Constant):
            out.append(f"const({_fmt(term.value)})")
        else:
            out.append(f"cos({_fmt(term.amplitude)}, {_fmt(term.angular_frequency)}, "
                       f"{_fmt(term.phase)})")
    return " + ".join(out)


def _vector(text: str) -> tuple:
    return tuple(number(v) for v in _split_top(text, ","))


def _truthy(text: str) -> bool:
    val = text.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class PESettings:
    T: float
    sphere_resolution: int = 16
    window_step: float | None = None
    horizon: float | None = None

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be > 0")
        if self.sphere_resolution < 8:
            raise ValueError("sphere_resolution must be >= 8")
        if self.window_step is not None and not self.window_step > 0:
            raise ValueError("window_step must be > 0")


@dataclass(frozen=True)
class OutputSettings:
    csv_path: str = "out"
    plot_data: bool = False
    plot_mode: str = "V_vs_t"
    plot_logscale: bool = False

    def __post_init__(self):
        if self.plot_mode not in ("V_vs_t", "x_vs_t", "theta_vs_t"):
            raise ValueError(f"unknown plot mode {self.plot_mode!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    regressor: SinusoidVector | PiecewiseConstant
    parameter: ParameterSignal
    estimators: tuple
    theta_hat0: tuple
    horizon: float
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    pe: PESettings | None = None
    outputs: OutputSettings = field(default_factory=OutputSettings)
    t0_offset: float = 0.0
    escape_level: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "theta_hat0",
                           tuple(float(v) for v in np.atleast_1d(self.theta_hat0)))
        object.__setattr__(self, "estimators", tuple((str(k), s) for k, s in self.estimators))
        n = self.regressor.dimension
        if len(self.theta_hat0) != n:
            raise ScenarioError(f"[scenario] theta_hat0: expected {n} values, got "
                                f"{len(self.theta_hat0)}")
        if self.parameter.dimension != n:
            raise ScenarioError(f"[parameter]: dimension {self.parameter.dimension} does not match "
                                f"the regressor dimension {n}")
        if not self.horizon > 0:
            raise ScenarioError("[scenario] horizon: must be > 0")
        if self.t0_offset < 0:
            raise ScenarioError("[scenario] t0_offset: must be >= 0")
        if self.pe is None:
            object.__setattr__(self, "pe", PESettings(T=self.horizon))
        if self.horizon < self.pe.T:
            raise ScenarioError(f"[pe] T: the horizon {self.horizon} is shorter than T={self.pe.T}")
        labels = [k for k, _ in self.estimators]
        if len(set(labels)) != len(labels):
            raise ScenarioError("[estimator.*]: duplicate estimator names")
        for label, spec in self.estimators:
            if isinstance(spec, Tracker) and n != 1:
                raise ScenarioError(f"[estimator.{label}] kind: the tracker needs a scalar "
                                    f"problem, dimension is {n}")

    @property
    def dimension(self) -> int:
        return self.regressor.dimension

    @property
    def pe_T(self) -> float:
        return self.pe.T

    def theta0(self) -> np.ndarray:
        """True parameter at t = 0 (after the offset)."""
        return self.parameter.shifted(self.t0_offset).eval(0.0)

    def x0(self) -> np.ndarray:
        return np.asarray(self.theta_hat0) - self.theta0()

    def with_estimators(self, estimators) -> "ScenarioConfig":
        return replace(self, estimators=tuple(estimators))


def _get(sec, key, conv, default=None, required=False, name=None):
    name = name or sec.name
    if key not in sec:
        if required:
            raise ScenarioError(f"[{name}] {key}: missing")
        return default
    try:
        return conv(sec[key])
    except (ValueError, SignalError, EstimatorError) as exc:
        raise ScenarioError(f"[{name}] {key}: {exc}") from None


def _parse_regressor(sec, n):
    kind = sec.get("type", "sum").strip().lower()
    try:
        if kind == "piecewise":
            vectors = [_vector(row) for row in sec["vectors"].split(";") if row.strip()]
            if any(len(v) != n for v in vectors):
                raise ScenarioError(f"[regressor] vectors: every vector needs {n} entries")
            dwell = _vector(sec.get("dwell", "1"))
            cycle = _truthy(sec.get("cycle", "true"))
            return PiecewiseConstant(np.array(vectors), dwell if len(dwell) > 1 else dwell[0], cycle)
        if kind != "sum":
            raise ScenarioError(f"[regressor] type: unknown regressor type {kind!r}")
        comps = []
        for i in range(n):
            key = f"u{i + 1}"
            if key not in sec:
                raise ScenarioError(f"[regressor] {key}: missing (dimension is {n})")
            comps.append(_get(sec, key, parse_scalar_signal))
        extra = [k for k in sec if re.fullmatch(r"u\d+", k) and int(k[1:]) > n]
        if extra:
            raise ScenarioError(f"[regressor] {extra[0]}: more components than dimension {n}")
        return SinusoidVector(tuple(comps))
    except KeyError as exc:
        raise ScenarioError(f"[regressor] {exc.args[0]}: missing") from None
    except (ValueError, SignalError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"[regressor]: {exc}") from None


def _parse_parameter(sec, n):
    gamma = _get(sec, "gamma", number)
    try:
        if "value" in sec:
            value = _get(sec, "value", _vector)
            if len(value) != n:
                raise ScenarioError(f"[parameter] value: expected {n} values, got {len(value)}")
            return ParameterSignal(constant=np.array(value), gamma=gamma)
        comps = []
        for i in range(n):
            key = f"theta{i + 1}"
            if key not in sec:
                raise ScenarioError(f"[parameter] {key}: missing (give 'value' or theta1..theta{n})")
            comps.append(_get(sec, key, parse_scalar_signal))
        return ParameterSignal(signal=SinusoidVector(tuple(comps)), gamma=gamma)
    except SignalError as exc:
        raise ScenarioError(f"[parameter]: {exc}") from None


def _parse_estimator(sec, label):
    name = f"estimator.{label}"
    kind = _get(sec, "kind", lambda s: s.strip().lower(), required=True, name=name)
    try:
        if kind == "single":
            return Single(_get(sec, "p", number, required=True, name=name))
        if kind == "composite":
            return Composite(ExponentSet.of(_get(sec, "exponents", _vector, required=True, name=name)))
        if kind == "tracker":
            return Tracker(_get(sec, "L", number, required=True, name=name),
                           _get(sec, "delta", number, DEFAULT_DELTA, name=name))
    except EstimatorError as exc:
        key = {"single": "p", "composite": "exponents", "tracker": "L"}[kind]
        raise ScenarioError(f"[{name}] {key}: {exc}") from None
    raise ScenarioError(f"[{name}] kind: unknown estimator kind {kind!r}")


def loads_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"{source}: parse error: {exc}") from None
    for sec in parser.sections():
        if sec not in SECTIONS and not sec.startswith("estimator."):
            raise ScenarioError(f"[{sec}]: unknown section")
    for sec in ("scenario", "regressor", "parameter"):
        if not parser.has_section(sec):
            raise ScenarioError(f"[{sec}]: missing section")

    s = parser["scenario"]
    n = _get(s, "dimension", lambda v: int(number(v)), None)
    if n is None:
        reg = parser["regressor"]
        n = (len(_vector(reg["vectors"].split(";")[0])) if reg.get("type", "") == "piecewise"
             else sum(1 for k in reg if re.fullmatch(r"u\d+", k)))
    if n < 1:
        raise ScenarioError("[scenario] dimension: must be a positive integer")

    regressor = _parse_regressor(parser["regressor"], n)
    parameter = _parse_parameter(parser["parameter"], n)
    estimators = []
    for sec in parser.sections():
        if sec.startswith("estimator."):
            label = sec.split(".", 1)[1]
            estimators.append((label, _parse_estimator(parser[sec], label)))
    if not estimators:
        raise ScenarioError("[estimator.*]: at least one estimator section is required")

    integ = {}
    if parser.has_section("integrator"):
        sec = parser["integrator"]
        for key, conv in (("step", number), ("conv_tol", number), ("conv_dwell", number),
                          ("record_stride", lambda v: int(number(v))),
                          ("method", lambda v: v.strip().lower())):
            val = _get(sec, key, conv)
            if val is not None:
                integ[key] = val
    try:
        integrator = IntegratorConfig(**integ)
    except ValueError as exc:
        raise ScenarioError(f"[integrator]: {exc}") from None

    horizon = _get(s, "horizon", number, required=True)
    pe = None
    if parser.has_section("pe"):
        sec = parser["pe"]
        try:
            pe = PESettings(T=_get(sec, "T", number, required=True),
                            sphere_resolution=_get(sec, "sphere_resolution", lambda v: int(number(v)), 16),
                            window_step=_get(sec, "window_step", number),
                            horizon=_get(sec, "horizon", number))
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"[pe]: {exc}") from None

    outputs = OutputSettings()
    if parser.has_section("outputs"):
        sec = parser["outputs"]
        try:
            outputs = OutputSettings(csv_path=sec.get("csv_path", "out").strip(),
                                     plot_data=_get(sec, "plot_data", _truthy, False),
                                     plot_mode=sec.get("plot_mode", "V_vs_t").strip(),
                                     plot_logscale=_get(sec, "plot_logscale", _truthy, False))
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"[outputs]: {exc}") from None

    return ScenarioConfig(
        name=s.get("name", Path(source).stem).strip(),
        regressor=regressor,
        parameter=parameter,
        estimators=tuple(estimators),
        theta_hat0=_get(s, "theta_hat0", _vector, required=True),
        horizon=horizon,
        integrator=integrator,
        pe=pe,
        outputs=outputs,
        t0_offset=_get(s, "t0_offset", number, 0.0),
        escape_level=_get(s, "escape_level", number, 1.0),
    )


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario file ({exc.strerror})") from None
    return loads_scenario(text, source=str(path))


def _join(values) -> str:
    return ", ".join(_fmt(v) for v in values)


def dumps_scenario(cfg: ScenarioConfig) -> str:
    """Canonical text form; :func:`loads_scenario` reproduces ``cfg`` exactly."""
    lines = ["[scenario]", f"name = {cfg.name}", f"dimension = {cfg.dimension}",
             f"horizon = {_fmt(cfg.horizon)}", f"theta_hat0 = {_join(cfg.theta_hat0)}",
             f"t0_offset = {_fmt(cfg.t0_offset)}", f"escape_level = {_fmt(cfg.escape_level)}", "",
             "[regressor]"]
    reg = cfg.regressor
    if isinstance(reg, PiecewiseConstant):
        if reg.offset:
            raise ValueError("cannot serialise a piecewise regressor with an internal offset")
        lines += ["type = piecewise",
                  "vectors = " + "; ".join(_join(v) for v in reg.vectors),
                  f"dwell = {_join(reg.dwells)}", f"cycle = {str(reg.cycle).lower()}"]
    else:
        lines += [f"u{i + 1} = {format_scalar_signal(c)}" for i, c in enumerate(reg.components)]
    lines += ["", "[parameter]"]
    par = cfg.parameter
    if par.is_constant:
        lines.append(f"value = {_join(par.constant)}")
    else:
        lines += [f"theta{i + 1} = {format_scalar_signal(c)}"
                  for i, c in enumerate(par.signal.components)]
    lines.append(f"gamma = {_fmt(par.gamma)}")
    for label, spec in cfg.estimators:
        lines += ["", f"[estimator.{label}]"]
        if isinstance(spec, Single):
            lines += ["kind = single", f"p = {_fmt(spec.p)}"]
        elif isinstance(spec, Composite):
            lines += ["kind = composite", f"exponents = {_join(spec.exponents)}"]
        else:
            lines += ["kind = tracker", f"L = {_fmt(spec.L)}", f"delta = {_fmt(spec.delta)}"]
    ic = cfg.integrator
    lines += ["", "[integrator]", f"step = {_fmt(ic.step)}", f"method = {ic.method}",
              f"conv_tol = {_fmt(ic.conv_tol)}", f"record_stride = {ic.record_stride}"]
    if ic.conv_dwell is not None:
        lines.append(f"conv_dwell = {_fmt(ic.conv_dwell)}")
    pe = cfg.pe
    lines += ["", "[pe]", f"T = {_fmt(pe.T)}", f"sphere_resolution = {pe.sphere_resolution}"]
    if pe.window_step is not None:
        lines.append(f"window_step = {_fmt(pe.window_step)}")
    if pe.horizon is not None:
        lines.append(f"horizon = {_fmt(pe.horizon)}")
    out = cfg.outputs
    lines += ["", "[outputs]", f"csv_path = {out.csv_path}",
              f"plot_data = {str(out.plot_data).lower()}", f"plot_mode = {out.plot_mode}",
              f"plot_logscale = {str(out.plot_logscale).lower()}", ""]
    return "\n".join(lines)


def bundled_scenario(name: str) -> Path:
    """Path of a scenario file shipped with the package (``scalar_decay.cfg`` etc.)."""
    path = Path(__file__).parent / "scenarios" / name
    if not path.suffix:
        path = path.with_suffix(".cfg")
    if not path.exists():
        raise FileNotFoundError(f"no bundled scenario {name!r}")
    return path
