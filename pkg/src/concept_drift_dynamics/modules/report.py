"""CSV and text writers for trajectories, Monte Carlo averages, comparisons and scans."""

import csv
import logging
from pathlib import Path

import numpy as np

from ..utils.order_parameters import STATE_FIELDS

logger = logging.getLogger(__name__)

SYSTEM_COLUMNS = {
    "lvq": ["eps1", "eps2", "eps_ref", "eps_track", "p1"],
    "scm": ["S1", "S2"],
}

SCAN_COLUMNS = [
    "parameter",
    "value",
    "eps_plateau",
    "eps_final",
    "lambda_s",
    "final_converged",
    "plateau_length",
    "plateau_status",
]


def value_columns(system):
    """Non-time columns of a trajectory table in their fixed order."""
    return list(STATE_FIELDS) + ["eps_g"] + SYSTEM_COLUMNS[system]


def format_float(value):
    """17 significant digits, enough for an exact round trip."""
    return format(float(value), ".17g")


def write_trajectory_csv(path, trajectory, system):
    columns = value_columns(system)
    rows = zip(trajectory.times, *(trajectory.column(name) for name in columns))
    return _write_csv(path, ["time"] + columns, ([format_float(v) for v in row] for row in rows))


def write_monte_carlo_csv(path, result, system):
    """Averages followed by ``sem_<column>`` for every value column."""
    columns = value_columns(system)
    header = ["time"] + columns + [f"sem_{name}" for name in columns]
    data = [result.times] + [result.mean[name] for name in columns] + [result.sem[name] for name in columns]
    return _write_csv(path, header, ([format_float(v) for v in row] for row in zip(*data)))


def write_run_csvs(out_dir, result, system):
    """Per-run raw dumps ``run_<index>.csv``."""
    columns = value_columns(system)
    paths = []
    for index, run in enumerate(result.runs):
        data = [run["time"]] + [run[name] for name in columns]
        rows = ([format_float(v) for v in row] for row in zip(*data))
        paths.append(_write_csv(Path(out_dir) / f"run_{index}.csv", ["time"] + columns, rows))
    return paths


def compare_table(ode, mc, system):
    """Join an ODE trajectory and a Monte Carlo result on their common sample times.

    Returns ``(header, rows)`` with ``<name>_ode, <name>_mc, <name>_sem, <name>_diff``
    per observable; ``diff`` is MC minus ODE.
    """
    columns = value_columns(system)
    ode_times = np.asarray(ode.times)
    header = ["time"]
    for name in columns:
        header += [f"{name}_ode", f"{name}_mc", f"{name}_sem", f"{name}_diff"]
    ode_columns = {name: ode.column(name) for name in columns}
    rows = []
    for k, t in enumerate(mc.times):
        matches = np.flatnonzero(np.abs(ode_times - t) <= 1e-9 * max(1.0, abs(t)))
        if matches.size == 0:
            continue
        j = int(matches[0])
        row = [t]
        for name in columns:
            ode_value, mc_value = ode_columns[name][j], mc.mean[name][k]
            row += [ode_value, mc_value, mc.sem[name][k], mc_value - ode_value]
        rows.append(row)
    return header, rows


def write_compare_csv(path, header, rows):
    return _write_csv(path, header, ([format_float(v) for v in row] for row in rows))


def write_scan_csv(path, rows):
    def cells(row):
        length = "" if row.plateau_length is None else format_float(row.plateau_length)
        return [
            row.parameter,
            format_float(row.value),
            format_float(row.eps_plateau),
            format_float(row.eps_final),
            format_float(row.lambda_s),
            str(row.final_converged).lower(),
            length,
            row.plateau_status,
        ]

    return _write_csv(path, SCAN_COLUMNS, (cells(row) for row in rows))


def format_report(report, final=None):
    """Stability report as ``key: value`` lines; ``final`` adds the long-time state."""
    fp = report.fixed_point
    eigenvalues = ", ".join(f"{ev.real:.10g}{ev.imag:+.10g}j" for ev in sorted(report.eigenvalues, key=lambda z: -z.real))
    lines = [
        f"activation: {report.model.activation}",
        f"delta: {format_float(report.model.delta)}",
        f"gamma: {format_float(report.model.gamma)}",
        f"fixed_point: R={format_float(fp.R11)} Q={format_float(fp.Q11)} C={format_float(fp.Q12)}",
        f"eps_plateau: {format_float(report.eps_plateau)}",
        f"eigenvalues: {eigenvalues}",
        f"lambda_s: {format_float(report.lambda_s)}",
        f"converged: {str(report.converged).lower()}",
        f"residual_norm: {report.residual_norm:.3e}",
        f"newton_iterations: {report.iterations}",
    ]
    if final is not None:
        lines += [
            f"eps_final: {format_float(final.eps_final)}",
            f"final_converged: {str(final.converged).lower()}",
            f"escaped: {str(final.escaped).lower()}",
        ]
    return "\n".join(lines) + "\n"


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    logger.debug("Report: %s", path)
    return path


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
            count += 1
    logger.debug("CSV: %s (%d rows)", path, count)
    return path
