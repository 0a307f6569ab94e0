import json

import numpy as np
import pandas as pd

from core.report import ResidualReport, ResidualTracker
from core.spray import Trajectory
from harness.export import _plain, report_json, trajectory_manifest, write_manifest, write_report, write_trajectory_csv


def sample_report() -> ResidualReport:
    tracker = ResidualTracker()
    tracker.record("zeta.check", 1e-13)
    tracker.record("alpha.check", 2.0)
    report = tracker.report({}, 1e-9)
    report.environment["seed"] = 42
    report.values["G"] = np.array([2 + 1j])
    return report


def sample_trajectory() -> Trajectory:
    times = np.linspace(0.0, 0.2, 3)
    z = np.array([[1.0 + 0j], [1.1 + 0.1j], [1.2 + 0.2j]])
    u = np.array([[1.0 + 1j], [1.0 + 1j], [1.0 + 1j]])
    return Trajectory(times, z, u, 0.1, residuals={"admissibility": 1e-12})


def test_plain_values():
    value = {1: np.array([1 + 2j, 3]), "x": (np.float64(0.5), np.int64(3)), "y": complex(0, -1)}
    assert _plain(value) == {"1": [[1.0, 2.0], [3.0, 0.0]], "x": [0.5, 3], "y": [0.0, -1.0]}


def test_report_json_is_deterministic():
    first = report_json(sample_report(), {"algebroid": "trivial"})
    second = report_json(sample_report(), {"algebroid": "trivial"})
    assert first == second
    payload = json.loads(first)
    assert [c["name"] for c in payload["checks"]] == ["alpha.check", "zeta.check"]
    assert payload["values"]["G"] == [[2.0, 1.0]]
    assert payload["scenario"] == {"algebroid": "trivial"}
    assert payload["environment"] == {"seed": 42}


def test_write_report(tmp_path):
    path = write_report(sample_report(), {}, tmp_path / "out" / "report.json")
    payload = json.loads(path.read_text())
    assert payload["checks"][0]["passed"] is False
    assert payload["checks"][1]["passed"] is True


def test_trajectory_csv(tmp_path):
    path = write_trajectory_csv(sample_trajectory(), tmp_path / "curve.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["t", "Re z1", "Im z1", "Re u1", "Im u1"]
    assert len(frame) == 3
    assert frame["Im z1"].iloc[-1] == 0.2


def test_manifest(tmp_path):
    manifest = trajectory_manifest(sample_trajectory(), algebroid="trivial")
    assert manifest["samples"] == 3
    assert manifest["method"] == "rk4"
    assert manifest["t_end"] == 0.2
    assert manifest["algebroid"] == "trivial"
    path = write_manifest(sample_trajectory(), tmp_path / "manifest.json", algebroid="trivial")
    assert json.loads(path.read_text()) == manifest
