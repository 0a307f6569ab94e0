import json
import math

import numpy as np
import pytest

from core.errors import UnsupportedInputError
from core.report import ResidualTracker
from harness.runner import ScenarioRunner, apply_ledger
from harness.scenario import SamplingSpec, Scenario, ToleranceLedger


def make_runner(algebroid, command, **fields):
    fields.setdefault("sampling", SamplingSpec(points=3, seed=7))
    return ScenarioRunner(Scenario(algebroid=algebroid, command=command, **fields))


def test_ledger_rejudges_tagged_checks():
    tracker = ResidualTracker()
    tracker.record("structure.jacobi", 5e-9)
    tracker.record("spray.fd_oracle", 5e-7)
    tracker.record("integrate.admissibility", 5e-7)
    tracker.record("integrate.order_ratio", 0.0)
    report = tracker.report({"spray.fd_oracle": "fd", "integrate.admissibility": "ode",
                             "integrate.order_ratio": 0.0}, "exact_ad")
    assert not report.get("structure.jacobi").passed
    assert report.get("structure.jacobi").ledger == "exact_ad"
    assert report.get("integrate.order_ratio").ledger is None

    apply_ledger(report, ToleranceLedger(exact_ad=1e-8, fd=1e-7))
    assert report.get("structure.jacobi").passed
    assert report.get("structure.jacobi").tolerance == 1e-8
    assert not report.get("spray.fd_oracle").passed
    assert report.get("integrate.admissibility").tolerance == 1e-6
    assert report.get("integrate.admissibility").passed
    assert report.get("integrate.order_ratio").tolerance == 0.0


def test_ledger_entries_with_equal_defaults_stay_apart():
    # fd and ode share a default; a plain number equal to a default is not a ledger entry
    tracker = ResidualTracker()
    tracker.record("cross.fd", 5e-7)
    tracker.record("cross.ode", 5e-7)
    tracker.record("chart.1.identity", 5e-11)
    report = tracker.report({"cross.fd": "fd", "cross.ode": "ode", "chart.1.identity": 1e-10}, "exact_ad")

    apply_ledger(report, ToleranceLedger(fd=1e-7, transport=1e-12))
    assert not report.get("cross.fd").passed
    assert report.get("cross.ode").passed
    assert report.get("cross.ode").tolerance == 1e-6
    assert report.get("chart.1.identity").tolerance == 1e-10
    assert report.get("chart.1.identity").passed


def test_validate_reports_environment():
    report = make_runner("twochart", "validate").run()
    assert report.passed, [c.name for c in report.failures()]
    assert "chart.1.eta_law" in report
    assert report.environment["algebroid"] == "twochart"
    assert report.environment["points"] == 3
    assert report.environment["seed"] == 7
    assert report.values["probe"] == {"z": [1 + 0j], "u": [2 + 0j]}
    assert report.values["anchor_rank"] == 1


def test_derive_spray_at_probe():
    report = make_runner("trivial", "derive-spray").run()
    assert report.passed, [c.name for c in report.failures()]
    assert np.allclose(report.values["G"], [2])
    assert report.values["is_spray"] is True


def test_derive_spray_checks_every_chart():
    report = make_runner("twochart", "derive-spray").run()
    assert report.passed, [c.name for c in report.failures()]
    assert report.get("chart.1.semispray.vertical_law").passed
    assert report.get("chart.1.semispray.horizontal_law").passed


def test_derive_connection_on_trivial_algebroid():
    report = make_runner("trivial", "derive-connection").run()
    # N = dG/du = u / z at the probe point
    assert np.allclose(report.values["N"], [[2]])
    assert "torsion" in report.values
    assert "curvature" in report.values
    assert report.get("adapted.delta_delta").passed


def test_integrate_linear_flow():
    runner = make_runner("tangent", "integrate", lagrangian="u1*ub1 + u2*ub2", step=1e-3, t_end=0.05)
    report = runner.run()
    assert report.passed, [c.name for c in report.failures()]
    assert report.values["samples"] == 51
    assert report.values["order_ratio"] == "exact"
    assert np.allclose(report.values["endpoint"]["z"], [1.1, 1.1])
    assert runner.trajectory is not None
    assert math.isinf(runner.trajectory.residuals["order_ratio"])


@pytest.mark.parametrize("name, case, keys", [
    ("scaled", 1, {"N_chern_lagrange"}),
    ("immersion", 2, {"N_E", "N_TM"}),
    ("submersion", 3, {"N_TM", "metric_TM"}),
])
def test_induce_by_rank_case(name, case, keys):
    report = make_runner(name, "induce").run()
    assert report.passed, [(c.name, c.max_residual) for c in report.failures()]
    assert report.values["case"] == case
    assert keys <= set(report.values)


def test_direction_selects_lagrangian_domain():
    runner = make_runner("scaled", "induce", lagrangian="eta1*etab1", direction="TM_to_E")
    assert runner.lagrangian.domain == "onTM"
    runner = make_runner("scaled", "induce", lagrangian="u1*ub1", direction="E_to_TM")
    assert runner.lagrangian.domain == "onE"


def test_missing_lagrangian(tmp_path):
    path = tmp_path / "bare.json"
    path.write_text(json.dumps({"name": "bare", "n": 1, "m": 1, "rho": [["1"]]}))
    runner = make_runner(str(path), "induce")
    assert runner.lagrangian is None
    with pytest.raises(UnsupportedInputError):
        runner.run()
    report = make_runner(str(path), "report").run()
    assert "structure.jacobi" in report
    assert "G" not in report.values
