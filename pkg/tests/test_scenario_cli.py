import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from homgrad import (Composite, IntegratorConfig, PiecewiseConstant, ScenarioError, Single, Tracker,
                     bundled_scenario, dumps_scenario, load_scenario, loads_scenario, number)
from homgrad.cli import main, run, sweep, vary
from homgrad.integrator import read_csv
from homgrad.plotdata import emit_plot_data

BUNDLED = ["scalar_decay", "scalar_decay_log", "tracker_sinusoid", "vector_decay",
           "vector_decay_log", "orthogonal_sequence"]

SMALL = """
[scenario]
name = small
horizon = 6.5
theta_hat0 = 0

[regressor]
u1 = cos(2, 2)

[parameter]
value = 5

[estimator.p075]
kind = single
p = 3/4

[estimator.composite]
kind = composite
exponents = 3/4, 3/2

[integrator]
step = 1e-4
record_stride = 100

[pe]
T = pi/2
window_step = pi/32
horizon = pi

[outputs]
plot_data = true
plot_mode = V_vs_t
"""


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_scenarios_parse_and_roundtrip(name):
    cfg = load_scenario(bundled_scenario(name))
    assert cfg.name == name
    again = loads_scenario(dumps_scenario(cfg))
    assert again == cfg


def test_scalar_scenario_contents():
    cfg = load_scenario(bundled_scenario("scalar_decay"))
    assert cfg.theta0() == pytest.approx([5.0])
    assert cfg.regressor.eval(0.0) == pytest.approx([2.0])
    assert [s for _, s in cfg.estimators] == [Single(0.75), Single(1), Single(1.5),
                                              Composite([0.75, 1.5])]


def test_vector_scenario_contents():
    cfg = load_scenario(bundled_scenario("vector_decay"))
    assert cfg.theta0() == pytest.approx([-3.0, math.sqrt(2), 4.0])
    assert cfg.regressor.eval(0.0) == pytest.approx([2.0, -1.0, 5.0])


def test_tracker_and_piecewise_scenarios():
    trk = load_scenario(bundled_scenario("tracker_sinusoid"))
    assert isinstance(trk.estimators[0][1], Tracker) and trk.parameter.gamma == 3.0
    orth = load_scenario(bundled_scenario("orthogonal_sequence"))
    assert isinstance(orth.regressor, PiecewiseConstant)


@pytest.mark.parametrize("edit,field", [
    (("p = 3/4", "p = -1"), "[estimator.p075] p"),
    (("value = 5", "value = 5, 1"), "[parameter]"),
    (("u1 = cos(2, 2)", "u1 = cos(2, 2"), "[regressor] u1"),
    (("step = 1e-4", "step = -1"), "[integrator]"),
    (("kind = single", "kind = magic"), "[estimator.p075] kind"),
    (("horizon = 6.5", "horizon = banana"), "[scenario] horizon"),
])
def test_errors_name_the_field(edit, field):
    with pytest.raises(ScenarioError) as info:
        loads_scenario(SMALL.replace(*edit))
    assert field in str(info.value)


def test_tracker_needs_scalar_problem():
    text = SMALL.replace("u1 = cos(2, 2)", "u1 = cos(2, 2)\nu2 = cos(1, 1)")
    text = text.replace("value = 5", "value = 5, 1").replace("theta_hat0 = 0", "theta_hat0 = 0, 0")
    text += "\n[estimator.trk]\nkind = tracker\nL = 2\n"
    with pytest.raises(ScenarioError, match="tracker"):
        loads_scenario(text)


def test_number_parser_is_safe():
    assert number("pi/2") == pytest.approx(math.pi / 2)
    assert number("3*sqrt(2) - 1e-3") == pytest.approx(3 * math.sqrt(2) - 1e-3)
    for bad in ("__import__('os')", "open('x')", "2 ** 1000000000", ""):
        with pytest.raises(ValueError):
            number(bad)


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def test_cli_run_writes_outputs(small_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(small_cfg), "--out", str(out)]) == 0
    assert (out / "small_p075.csv").read_text().splitlines()[0] == "t,x_1,e,V,theta_hat_1"
    tr = read_csv(out / "small_composite.csv")
    assert tr.times[0] == 0.0 and tr.times[-1] == pytest.approx(6.5)
    summary = json.loads((out / "small_summary.json").read_text())
    rows = {r["estimator"]: r for r in summary["estimators"]}
    assert rows["p075"]["class"] == "finite_time" and rows["p075"]["bound_satisfied"] is True
    assert rows["composite"]["class"] == "fixed_time"
    assert rows["composite"]["bound"]["k_parts"] == [2, 1]
    data = (out / "small_V_vs_t.dat").read_text().splitlines()
    assert data[0] == "# t V_p075 V_composite"
    assert "plot 'small_V_vs_t.dat'" in (out / "small_V_vs_t.gp").read_text()
    assert "converged_at" in capsys.readouterr().out


def test_cli_pe_and_bounds(small_cfg, capsys):
    assert main(["pe", str(small_cfg)]) == 0
    cert = json.loads(capsys.readouterr().out)
    assert cert["raw_epsilon"] == pytest.approx(4 / math.pi, rel=1e-6)
    assert main(["bounds", str(small_cfg)]) == 0
    rows = json.loads(capsys.readouterr().out)["estimators"]
    assert rows[0]["bound"]["k"] == 3


def test_cli_sweep_x0(small_cfg, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", str(small_cfg), "--vary", "x0", "--values", "1", "1000",
                 "--jobs", "2", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    comp = [r for r in rows if r["estimator"] == "composite"]
    assert [float(r["value"]) for r in comp] == [1.0, 1000.0]
    assert all(float(r["converged_at"]) <= float(r["bound"]) for r in comp)


def test_sweep_p_small_exponents_converge():
    cfg = loads_scenario(SMALL.replace("horizon = 6.5", "horizon = 8"))
    # p = 1/4 chatters at a level ~h^(1/(1-p)) under RK4, so use a looser band here
    cfg = replace(cfg, integrator=IntegratorConfig(step=1e-4, conv_tol=1e-4, record_stride=10))
    rows = sweep(cfg, "p", [0.25, 0.5, 0.75])
    assert [r["value"] for r in rows] == [0.25, 0.5, 0.75]
    assert all(r["converged_at"] is not None for r in rows)


def test_sweep_dwell_below_threshold_leaves_residual():
    cfg = load_scenario(bundled_scenario("orthogonal_sequence"))
    cfg = replace(cfg, integrator=IntegratorConfig(step=1e-4, conv_dwell=1, record_stride=100))
    rows = sweep(cfg, "dwell", [0.05, 1.0])
    short, long = rows
    assert short["x_norm_after_cycle"] > 1e-3
    assert long["x_norm_after_cycle"] < 1e-7


def test_sweep_rejects_unknown_field(small_cfg, capsys):
    assert main(["sweep", str(small_cfg), "--vary", "gamma", "--values", "1"]) == 1
    assert "unknown sweep field" in capsys.readouterr().err
    assert main(["sweep", str(small_cfg), "--vary", "L", "--values", "1"]) == 1


def test_cli_compare(small_cfg, tmp_path):
    out = tmp_path / "cmp.csv"
    assert main(["compare", str(small_cfg), "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0]
    assert header == "t,V_p075,V_composite"
    table = np.loadtxt(out, delimiter=",", skiprows=1)
    assert table.shape[1] == 3 and table[0, 1] == 12.5


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(SMALL.replace("p = 3/4", "p = -1"))
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["run", str(tmp_path / "missing.cfg")]) == 1
    blow = tmp_path / "blow.cfg"
    blow.write_text(SMALL.replace("theta_hat0 = 0", "theta_hat0 = 1e6")
                    .replace("step = 1e-4", "step = 0.1").replace("record_stride = 100",
                                                                  "record_stride = 1"))
    assert main(["run", str(blow), "--out", str(tmp_path)]) == 2
    assert "non-finite" in capsys.readouterr().err


def test_plot_data_modes(small_cfg, tmp_path):
    res = run(load_scenario(small_cfg), write=False)
    trajs = list(res.trajectories.values())
    for mode in ("V_vs_t", "x_vs_t", "theta_vs_t"):
        data, script, text = emit_plot_data(trajs, mode, tmp_path, logscale=True)
        table = np.loadtxt(data)
        assert table.shape[0] == trajs[0].times.size
        assert "set logscale y" in text
    assert np.loadtxt(data)[:, -1] == pytest.approx(5.0)
    with pytest.raises(ValueError):
        emit_plot_data(trajs, "phase", tmp_path)
    data, _, text = emit_plot_data([], "V_vs_t", tmp_path, stem="empty")
    assert data.read_text().strip() == "# t" and "plot " not in text


def test_vary_x0_keeps_direction():
    cfg = loads_scenario(SMALL)
    moved = vary(cfg, "x0", 3.0)
    assert moved.x0() == pytest.approx([-3.0])
    with pytest.raises(ScenarioError):
        vary(cfg, "dwell", 1.0)
