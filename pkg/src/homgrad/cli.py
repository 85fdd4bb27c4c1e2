"""Command line driver: ``homgrad run|pe|bounds|sweep|compare <scenario.cfg>``.

Exit status is 0 on success, 1 for invalid input and 2 when an integration
fails numerically.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analysis import (BoundError, classify, theorem1_bound, theorem2_escape_bound,
                       theorem3_fixed_time_bound, tracker_gain_check)
from .estimators import Composite, Single, Tracker, describe
from .integrator import IntegrationError, Trajectory, integrate
from .pe import PECertificate, certify
from .plotdata import emit_plot_data
from .scenario import ScenarioConfig, ScenarioError, load_scenario
from .signals import PiecewiseConstant

log = logging.getLogger("homgrad")

SWEEP_FIELDS = {"p": "p", "L": "L", "x0": "x0", "|x0|": "x0", "abs_x0": "x0", "dwell": "dwell"}


def certificate_for(cfg: ScenarioConfig) -> PECertificate:
    pe = cfg.pe
    horizon = pe.horizon if pe.horizon is not None else cfg.horizon
    step = pe.window_step if pe.window_step is not None else pe.T / 16
    regressor = cfg.regressor.shifted(cfg.t0_offset) if cfg.t0_offset else cfg.regressor
    return certify(regressor, pe.T, max(horizon, pe.T + step), pe.sphere_resolution, step)


def bound_for(cfg: ScenarioConfig, spec, cert: PECertificate):
    """The convergence-time bound that applies to ``spec`` on this scenario, if any."""
    if cfg.dimension != 1 or not cert.is_pe or not cfg.parameter.is_constant:
        return None
    x0 = float(abs(cfg.x0()[0]))
    try:
        if isinstance(spec, Single) and spec.p < 1:
            return theorem1_bound(x0, spec.p, cert)
        if isinstance(spec, Single) and spec.p > 1:
            return theorem2_escape_bound(cfg.escape_level, spec.p, cert)
        if isinstance(spec, Composite) and spec.exponents.below_one and spec.exponents.above_one:
            return theorem3_fixed_time_bound(spec.exponents, cert)
    except BoundError:
        return None
    return None


def summarize(cfg: ScenarioConfig, label: str, spec, traj: Trajectory, cert: PECertificate) -> dict:
    row = {
        "estimator": label,
        "spec": describe(spec),
        "converged_at": traj.converged_at,
        "hit_interval": traj.hit_interval(),
        "final_x_norm": float(traj.x_norm[-1]),
        "final_V": float(traj.V[-1]),
    }
    if cert.is_pe:
        cls = classify(spec, cfg.dimension, cert)
        row["class"] = cls.label
        row["justification"] = cls.justification
    else:
        row["class"] = None
        row["justification"] = "regressor not certified PE"
    report = bound_for(cfg, spec, cert)
    row["bound"] = report.as_dict() if report else None
    row["bound_event_time"] = None
    row["bound_satisfied"] = None
    if report is not None:
        if report.kind == "escape":
            event = traj.first_time_below_V(report.inputs["c"])
        else:
            event = traj.converged_at
        row["bound_event_time"] = event
        if event is not None:
            row["bound_satisfied"] = event <= report.bound * (1 + 1e-12)
        elif traj.times[-1] >= report.bound + traj.meta.get("conv_dwell", 0.0):
            row["bound_satisfied"] = False
    if isinstance(spec, Tracker):
        row["gain_condition"] = tracker_gain_check(spec.L, cfg.parameter.gamma)
        row["delta"] = spec.delta
    return row


@dataclass
class RunResult:
    scenario: ScenarioConfig
    certificate: PECertificate
    trajectories: dict
    summary: list


def run(cfg: ScenarioConfig, out_dir=None, write: bool = True) -> RunResult:
    """Integrate every estimator of the scenario; optionally write CSVs and plot data."""
    cert = certificate_for(cfg)
    trajectories, summary = {}, []
    for label, spec in cfg.estimators:
        log.info("integrating %s (%s)", label, describe(spec))
        traj = integrate(cfg, spec, cfg.integrator, label=label)
        trajectories[label] = traj
        summary.append(summarize(cfg, label, spec, traj, cert))
    if write:
        out = Path(out_dir if out_dir is not None else cfg.outputs.csv_path)
        out.mkdir(parents=True, exist_ok=True)
        for label, traj in trajectories.items():
            traj.to_csv(out / f"{cfg.name}_{label}.csv")
        record = {"scenario": cfg.name, "certificate": cert.as_dict(), "estimators": summary}
        (out / f"{cfg.name}_summary.json").write_text(json.dumps(record, indent=2))
        if cfg.outputs.plot_data:
            emit_plot_data(trajectories.values(), cfg.outputs.plot_mode, out, stem=cfg.name,
                           logscale=cfg.outputs.plot_logscale, title=cfg.name)
    return RunResult(cfg, cert, trajectories, summary)


def vary(cfg: ScenarioConfig, field: str, value: float) -> ScenarioConfig:
    """Copy of ``cfg`` with one sweep field set to ``value``."""
    key = SWEEP_FIELDS.get(field)
    if key is None:
        raise ScenarioError(f"unknown sweep field {field!r}; choose from p, L, x0, dwell")
    if key == "p":
        ests = [(lbl, Single(value)) for lbl, s in cfg.estimators if isinstance(s, Single)]
        if not ests:
            raise ScenarioError("sweeping p needs a single-exponent estimator")
        return replace(cfg, estimators=tuple(ests))
    if key == "L":
        ests = [(lbl, Tracker(value, s.delta)) for lbl, s in cfg.estimators if isinstance(s, Tracker)]
        if not ests:
            raise ScenarioError("sweeping L needs a tracker estimator")
        return replace(cfg, estimators=tuple(ests))
    if key == "x0":
        if value < 0:
            raise ScenarioError("|x0| must be >= 0")
        x0 = cfg.x0()
        norm = float(np.linalg.norm(x0))
        direction = x0 / norm if norm > 0 else np.eye(cfg.dimension)[0]
        return replace(cfg, theta_hat0=tuple(cfg.theta0() + value * direction))
    reg = cfg.regressor
    if not isinstance(reg, PiecewiseConstant):
        raise ScenarioError("sweeping dwell needs a piecewise-constant regressor")
    return replace(cfg, regressor=PiecewiseConstant(reg.vectors, (value,) * len(reg.dwells),
                                                    reg.cycle))


def _sweep_one(args):
    cfg, field, value = args
    scen = vary(cfg, field, value)
    cert = certificate_for(scen)
    rows = []
    for label, spec in scen.estimators:
        traj = integrate(scen, spec, scen.integrator, label=label)
        report = bound_for(scen, spec, cert)
        row = {"field": field, "value": value, "estimator": label, "spec": describe(spec),
               "converged_at": traj.converged_at,
               "bound": report.bound if report else None,
               "final_x_norm": float(traj.x_norm[-1])}
        row["ratio"] = (traj.converged_at / report.bound
                        if report and report.bound > 0 and traj.converged_at is not None else None)
        if isinstance(scen.regressor, PiecewiseConstant):
            t_cycle = sum(scen.regressor.dwells)
            row["x_norm_after_cycle"] = (float(traj.x_norm[traj.at(t_cycle)])
                                         if t_cycle <= traj.times[-1] else None)
        rows.append(row)
    return rows


def sweep(cfg: ScenarioConfig, field: str, values, jobs: int = 1) -> list:
    """One summary row per (value, estimator)."""
    vary(cfg, field, values[0] if values else 1.0)  # validate the field up front
    tasks = [(cfg, field, float(v)) for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    return [row for rows in results for row in rows]


def write_rows(rows: list, target) -> None:
    """Write sweep rows as CSV to a path or an open text stream."""
    keys = []
    for row in rows:
        keys += [k for k in row if k not in keys]
    if hasattr(target, "write"):
        _write_rows(rows, keys, target)
    else:
        with open(target, "w", newline="") as fh:
            _write_rows(rows, keys, fh)


def _write_rows(rows, keys, fh):
    writer = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in keys})


def compare(cfg: ScenarioConfig):
    """``(header, table)`` with V of every estimator on the shared time grid."""
    trajs = [integrate(cfg, spec, cfg.integrator, label=label) for label, spec in cfg.estimators]
    times = trajs[0].times
    header = ["t"] + [f"V_{tr.label}" for tr in trajs]
    table = np.column_stack([times] + [tr.V for tr in trajs])
    return header, table


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _print_summary(result: RunResult, out: Path):
    print(f"scenario {result.scenario.name}: T={result.certificate.T:.6g}, "
          f"epsilon={result.certificate.epsilon:.6g} (raw {result.certificate.raw_epsilon:.6g})")
    for row in result.summary:
        conv = "-" if row["converged_at"] is None else f"{row['converged_at']:.4f}"
        bound = "-" if row["bound"] is None else f"{row['bound']['bound']:.4f}"
        ok = {True: "ok", False: "VIOLATED", None: "-"}[row["bound_satisfied"]]
        print(f"  {row['estimator']:<14} {row['class'] or '-':<13} converged_at={conv:<10} "
              f"bound={bound:<10} {ok:<8} |x(end)|={row['final_x_norm']:.3e}")
    print(f"outputs written to {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homgrad", description="Simulate gradient estimators described by an INI scenario file.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate every estimator and write CSV traces")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: [outputs] csv_path)")

    p = sub.add_parser("pe", help="print the PE certificate of the regressor")
    p.add_argument("config")

    p = sub.add_parser("bounds", help="print convergence classes and time bounds")
    p.add_argument("config")

    p = sub.add_parser("sweep", help="rerun the scenario over values of one field")
    p.add_argument("config")
    p.add_argument("--vary", required=True, help="p, L, x0 or dwell")
    p.add_argument("--values", required=True, nargs="+", type=float)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="summary CSV path (default: stdout)")

    p = sub.add_parser("compare", help="CSV of V for every estimator on a shared grid")
    p.add_argument("config")
    p.add_argument("--out", help="CSV path (default: stdout)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_scenario(args.config)
        if args.command == "run":
            result = run(cfg, args.out)
            _print_summary(result, Path(args.out or cfg.outputs.csv_path))
        elif args.command == "pe":
            print(json.dumps(_jsonable(certificate_for(cfg).as_dict()), indent=2))
        elif args.command == "bounds":
            cert = certificate_for(cfg)
            rows = []
            for label, spec in cfg.estimators:
                report = bound_for(cfg, spec, cert)
                cls = classify(spec, cfg.dimension, cert) if cert.is_pe else None
                row = {"estimator": label, "spec": describe(spec),
                       "class": cls.label if cls else None,
                       "justification": cls.justification if cls else "not PE",
                       "bound": report.as_dict() if report else None}
                if isinstance(spec, Tracker):
                    row["gain_condition"] = tracker_gain_check(spec.L, cfg.parameter.gamma)
                rows.append(row)
            print(json.dumps(_jsonable({"certificate": cert.as_dict(), "estimators": rows}),
                             indent=2))
        elif args.command == "sweep":
            rows = sweep(cfg, args.vary, args.values, args.jobs)
            write_rows(rows, args.out or sys.stdout)
        elif args.command == "compare":
            header, table = compare(cfg)
            target = args.out or sys.stdout
            np.savetxt(target, table, fmt="%.17g", delimiter=",", header=",".join(header),
                       comments="")
    except BrokenPipeError:
        return 0
    except IntegrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ScenarioError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
