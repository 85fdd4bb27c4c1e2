"""Gnuplot-ready data files.  Nothing is rendered here."""

from __future__ import annotations

from pathlib import Path

import numpy as np

MODES = ("V_vs_t", "x_vs_t", "theta_vs_t")

_YLABEL = {"V_vs_t": "V(t)", "x_vs_t": "x(t)", "theta_vs_t": "theta(t)"}


def _columns(traj, mode):
    label = traj.label or "est"
    n = traj.dimension
    if mode == "V_vs_t":
        return [f"V_{label}"], [traj.V]
    if mode == "x_vs_t":
        return [f"x{i + 1}_{label}" for i in range(n)], [traj.x[:, i] for i in range(n)]
    return ([f"theta_hat{i + 1}_{label}" for i in range(n)],
            [traj.theta_hat[:, i] for i in range(n)])


def emit_plot_data(trajectories, mode: str, directory, stem: str = "plot",
                   logscale: bool = False, title: str | None = None):
    """Write ``<stem>_<mode>.dat`` (whitespace columns) and ``<stem>_<mode>.gp``.

    All trajectories must share one time grid.  In ``theta_vs_t`` mode the
    true parameter of the first trajectory is appended.  Returns
    ``(data_path, script_path, script_text)``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown plot mode {mode!r}; choose from {MODES}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data_path = directory / f"{stem}_{mode}.dat"
    script_path = directory / f"{stem}_{mode}.gp"

    trajectories = list(trajectories)
    names, cols = ["t"], []
    if trajectories:
        times = trajectories[0].times
        for tr in trajectories:
            if tr.times.shape != times.shape or not np.array_equal(tr.times, times):
                raise ValueError("trajectories do not share a time grid")
            n, c = _columns(tr, mode)
            names += n
            cols += c
        if mode == "theta_vs_t":
            theta = trajectories[0].theta
            names += [f"theta{i + 1}" for i in range(theta.shape[1])]
            cols += [theta[:, i] for i in range(theta.shape[1])]
        table = np.column_stack([times] + cols)
    else:
        table = np.empty((0, 1))
    np.savetxt(data_path, table, fmt="%.17g", header=" ".join(names))

    lines = [f"# {title or stem}: {mode}",
             f"set title '{title or stem}'",
             "set xlabel 't [s]'",
             f"set ylabel '{_YLABEL[mode]}'",
             "set key outside right"]
    if logscale:
        lines.append("set logscale y")
    if len(names) > 1:
        plots = [f"'{data_path.name}' using 1:{j + 2} with lines title '{name}'"
                 for j, name in enumerate(names[1:])]
        lines.append("plot " + ", \\\n     ".join(plots))
    script = "\n".join(lines) + "\n"
    script_path.write_text(script)
    return data_path, script_path, script
