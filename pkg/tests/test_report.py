"""CSV and text writers."""

import csv

import numpy as np
import pytest

from concept_drift_dynamics.modules.monte_carlo import MonteCarloResult
from concept_drift_dynamics.modules.ode_engine import Trajectory
from concept_drift_dynamics.modules.report import (
    SCAN_COLUMNS,
    compare_table,
    format_float,
    value_columns,
    write_compare_csv,
    write_scan_csv,
    write_trajectory_csv,
)
from concept_drift_dynamics.modules.stability import ScanRow
from concept_drift_dynamics.utils.order_parameters import STATE_FIELDS, OrderParameterState


def _scm_trajectory(times):
    states = [OrderParameterState.symmetric(0.1 * t, 0.5, 0.4) for t in times]
    observables = {"eps_g": np.array([0.3 - 0.01 * t for t in times]), "S1": np.zeros(len(times)), "S2": np.zeros(len(times))}
    return Trajectory(times=np.array(times, dtype=float), states=states, observables=observables)


def _scm_result(times, offset):
    mean = {name: np.full(len(times), 0.5) for name in STATE_FIELDS}
    mean["R11"] = 0.1 * np.array(times) + offset
    mean.update({"eps_g": np.full(len(times), 0.25), "S1": np.zeros(len(times)), "S2": np.zeros(len(times))})
    sem = {name: np.full(len(times), 0.01) for name in mean}
    return MonteCarloResult(times=np.array(times, dtype=float), mean=mean, sem=sem)


class TestFormatting:
    def test_round_trip_precision(self):
        value = 0.1 + 0.2
        assert float(format_float(value)) == value

    def test_columns(self):
        assert value_columns("scm") == list(STATE_FIELDS) + ["eps_g", "S1", "S2"]
        assert value_columns("lvq")[-1] == "p1"


class TestCompareTable:
    def test_joins_on_common_times(self):
        ode = _scm_trajectory([0.5, 1.0, 1.5])
        mc = _scm_result([0.0, 0.5, 1.0, 1.5], offset=0.02)
        header, rows = compare_table(ode, mc, "scm")
        assert [row[0] for row in rows] == [0.5, 1.0, 1.5]
        r11 = header.index("R11_diff")
        assert [row[r11] for row in rows] == pytest.approx([0.02, 0.02, 0.02])
        assert rows[0][header.index("eps_g_sem")] == 0.01

    def test_writes_csv(self, tmp_path):
        header, rows = compare_table(_scm_trajectory([0.0, 1.0]), _scm_result([0.0, 1.0], 0.0), "scm")
        path = write_compare_csv(tmp_path / "compare.csv", header, rows)
        with open(path, encoding="utf-8", newline="") as f:
            data = list(csv.reader(f))
        assert data[0] == header
        assert len(data) == 3


class TestWriters:
    def test_trajectory_csv(self, tmp_path):
        path = write_trajectory_csv(tmp_path / "nested" / "ode.csv", _scm_trajectory([0.0, 1.0]), "scm")
        with open(path, encoding="utf-8", newline="") as f:
            data = list(csv.reader(f))
        assert data[0] == ["time"] + value_columns("scm")
        assert float(data[2][1]) == pytest.approx(0.1)

    def test_scan_csv(self, tmp_path):
        rows = [
            ScanRow("delta", 0.05, 0.02, 0.01, 0.003, True, 120.5, "plateau"),
            ScanRow("delta", 0.1, 0.03, 0.03, -0.002, True, None, "no_escape"),
        ]
        path = write_scan_csv(tmp_path / "scan.csv", rows)
        with open(path, encoding="utf-8", newline="") as f:
            data = list(csv.reader(f))
        assert data[0] == SCAN_COLUMNS
        assert data[1][5:] == ["true", "120.5", "plateau"]
        assert data[2][6] == ""
