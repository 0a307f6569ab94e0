"""
Scenario runner: maps each command onto the core operations over a seeded point batch.
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from config import INTEGRATION_CONFIG
from core.algebroid import SectionExpr, anchor_morphism_residual, anchor_rank, validate_structure
from core.errors import ConfigError, UnsupportedInputError
from core.lagrange_induction import (
    LagrangeStructure,
    case2_induced_connection,
    case3_induced_connection,
    chern_lagrange_field,
    chern_lagrange_on_TM,
    eta_point,
    induction_case,
    induction_report,
    pullback_lagrangian,
)
from core.prolongation import (
    adapted_frame_bracket_residual,
    base_connection_from_prolongation,
    basis_bracket_residuals,
    lift_bracket_residuals,
    liouville_tangent_bracket_residual,
    prolong_curvature,
    prolong_differential_check,
    prolong_nlc_change_residual,
    semispray_section,
    spray_connection_field,
    tangent_structure_apply,
    tangent_structure_image_residual,
)
from core.report import ResidualReport, ResidualTracker
from core.spray import (
    SprayField,
    Trajectory,
    admissibility_residual,
    homogeneity_residual,
    integrate,
    liouville_bracket_residual,
    rk4_order_ratio,
    semispray_change_residual,
)
from core.tangent_geometry import (
    LinearConnectionCoeffs,
    adapted_bracket_coeffs,
    complex_structure_residual,
    curvature_table,
    induced_eta_change_residual,
    nlc_change_residual,
    torsion_table,
)
from harness.catalog import get_algebroid, lagrangian_domain
from harness.scenario import Scenario, ToleranceLedger, probe_point, sample_points

logger = logging.getLogger(__name__)


def apply_ledger(report: ResidualReport, ledger: ToleranceLedger) -> ResidualReport:
    """Re-judge every check tagged with a ledger entry against the scenario's ledger."""
    overrides = ledger.as_dict()
    for check in report.checks:
        if check.ledger is None:
            continue
        check.tolerance = overrides[check.ledger]
        check.passed = check.max_residual <= check.tolerance
    return report


class ScenarioRunner:
    """Executes one Scenario and collects its ResidualReport."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.algebroid, default_text = get_algebroid(scenario.algebroid)
        self.lagrangian = self._resolve_lagrangian(scenario.lagrangian or default_text)
        self.points = sample_points(self.algebroid, scenario.sampling)
        self.probe = probe_point(self.algebroid, scenario.probe)
        self.trajectory: Optional[Trajectory] = None
        logger.info(f"Runner ready: '{self.algebroid.name}' command={scenario.command} "
                    f"points={len(self.points)} seed={scenario.sampling.seed}")

    def _resolve_lagrangian(self, text: Optional[str]) -> Optional[LagrangeStructure]:
        if text is None:
            return None
        domain = self.scenario.lagrangian_domain
        if domain is None and self.scenario.direction is not None:
            domain = "onTM" if self.scenario.direction == "TM_to_E" else "onE"
        domain = domain or lagrangian_domain(self.algebroid.name)
        return LagrangeStructure.parse(text, domain, self.algebroid.n, self.algebroid.m)

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------

    def _require_lagrangian(self) -> LagrangeStructure:
        if self.lagrangian is None:
            raise UnsupportedInputError(f"No Lagrangian given for '{self.algebroid.name}'; pass --lagrangian")
        return self.lagrangian

    def lagrangian_on_E(self) -> LagrangeStructure:
        L = self._require_lagrangian()
        return pullback_lagrangian(self.algebroid, L) if L.domain == "onTM" else L

    def spray(self) -> SprayField:
        return SprayField.from_lagrangian(self.algebroid, self.lagrangian_on_E().L)

    def _transportable_charts(self):
        return [(i + 1, chart) for i, chart in enumerate(self.algebroid.charts) if chart.inverse_zmap is not None]

    def _section_pair(self) -> List[SectionExpr]:
        a = self.algebroid
        return [SectionExpr.basis(a.m, 1, a.n), SectionExpr.basis(a.m, min(2, a.m), a.n)]

    def _linear_connection(self) -> LinearConnectionCoeffs:
        a = self.algebroid
        if self.scenario.connection is None:
            return LinearConnectionCoeffs.zero(a.n, a.m)
        path = Path(self.scenario.connection)
        try:
            block = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"Cannot read linear connection: {e}", str(path)) from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Malformed JSON at line {e.lineno} column {e.colno}: {e.msg}", str(path)) from e
        try:
            return LinearConnectionCoeffs.from_json(block, a.n, a.m)
        except ConfigError as e:
            raise ConfigError(str(e), str(path)) from e

    def _finish(self, report: ResidualReport) -> ResidualReport:
        report.environment.update({
            "algebroid": self.algebroid.name,
            "command": self.scenario.command,
            "seed": self.scenario.sampling.seed,
            "points": len(self.points),
            "tolerances": self.scenario.tolerances.as_dict(),
        })
        report.values["probe"] = {"z": list(self.probe.z), "u": list(self.probe.u)}
        return apply_ledger(report, self.scenario.tolerances)

    # ------------------------------------------------------------------
    # commands
    # ------------------------------------------------------------------

    def validate(self) -> ResidualReport:
        """Structure identities, anchor morphism, complex structure and chart laws."""
        a = self.algebroid
        report = validate_structure(a, self.points, self.scenario.tolerances.as_dict())
        tracker = ResidualTracker()
        s1, s2 = self._section_pair()
        tracker.record("anchor.morphism", anchor_morphism_residual(a, s1, s2, self.points))
        tracker.record("tangent.complex_structure",
                       complex_structure_residual(a, self.points, self.scenario.sampling.seed))
        for index, chart in self._transportable_charts():
            tracker.record(f"chart.{index}.eta_law", induced_eta_change_residual(a, chart, self.points))
        report.merge(tracker.report({}, "exact_ad"))
        report.values["anchor"] = a.anchor_matrix(self.probe)
        report.values["anchor_rank"] = anchor_rank(a, self.probe)
        return report

    def derive_spray(self) -> ResidualReport:
        """Canonical spray, homogeneity, the Liouville bracket and covariance across charts."""
        a = self.algebroid
        L = self.lagrangian_on_E()
        L.reality(self.points)
        S = self.spray()
        tracker = ResidualTracker()
        for p in self.points:
            tracker.record("spray.homogeneity", homogeneity_residual(S, p), p)
            tracker.record("spray.liouville_bracket", liouville_bracket_residual(S, p), p)
            image = tangent_structure_apply(semispray_section(S, p))
            gap = np.concatenate([image.Z, image.V - np.array(p.u, dtype=complex)])
            tracker.record("prolongation.semispray_tangent", float(np.max(np.abs(gap))), p)
        report = tracker.report({"prolongation.semispray_tangent": "exact"}, "exact_ad")
        for index, chart in self._transportable_charts():
            report.merge(semispray_change_residual(S, chart, self.points), prefix=f"chart.{index}.")
        report.values["G"] = S.at(self.probe)
        report.values["is_spray"] = report.get("spray.homogeneity").passed
        return report

    def derive_connection(self) -> ResidualReport:
        """Connection induced by the spray on the prolongation, its curvature and the bracket identities of the prolongation."""
        a = self.algebroid
        S = self.spray()
        Np = spray_connection_field(a, S)
        report = ResidualReport()
        report.merge(adapted_frame_bracket_residual(a, Np, self.points))
        report.merge(basis_bracket_residuals(a, self.points))
        report.merge(prolong_differential_check(a, self.points))
        s1, s2 = self._section_pair()
        report.merge(lift_bracket_residuals(a, s1, s2, self.points))

        tracker = ResidualTracker()
        lifted = []
        for p in self.points:
            tracker.record("prolongation.liouville_tangent", liouville_tangent_bracket_residual(a, p), p)
            lifted.append(semispray_section(S, p))
        tracker.record("prolongation.tangent_square", tangent_structure_image_residual(lifted))
        report.merge(tracker.report({}, "exact"))

        base = None
        if a.n == a.m and anchor_rank(a, self.probe) == a.n:
            base = base_connection_from_prolongation(a, Np)
            table = adapted_bracket_coeffs(base, self.probe)
            report.values["adapted_brackets"] = table.to_dict()
            D = self._linear_connection()
            report.values["torsion"] = torsion_table(D, base, self.probe).to_dict()
            report.values["curvature"] = curvature_table(D, base, self.probe).to_dict()
        else:
            logger.info(f"Anchor of '{a.name}' is not square and invertible; base connection tables skipped")

        for index, chart in self._transportable_charts():
            target_spray = S.transport(chart)
            target = spray_connection_field(target_spray.algebroid, target_spray)
            report.merge(prolong_nlc_change_residual(Np, target, a, chart, self.points), prefix=f"chart.{index}.")
            if base is not None:
                target_base = base_connection_from_prolongation(target_spray.algebroid, target)
                report.merge(nlc_change_residual(base, chart, self.points, target_base), prefix=f"chart.{index}.")

        report.values["N"] = Np.at(self.probe)
        report.values["prolongation_curvature"] = prolong_curvature(a, Np, self.probe).to_dict()
        return report

    def integrate(self) -> ResidualReport:
        """RK4 integral curve from the probe point with admissibility and order checks."""
        a = self.algebroid
        S = self.spray()
        trajectory = integrate(S, self.probe, self.scenario.t_end, self.scenario.step)
        tracker = ResidualTracker()
        admissibility = admissibility_residual(trajectory, a)
        tracker.record("integrate.admissibility", admissibility)

        ratio = rk4_order_ratio(S, self.probe, INTEGRATION_CONFIG["order_t_end"], INTEGRATION_CONFIG["order_step"])
        low, high = INTEGRATION_CONFIG["order_ratio_bounds"]
        outside = 0.0 if math.isinf(ratio) else max(0.0, low - ratio, ratio - high)
        tracker.record("integrate.order_ratio", outside)
        trajectory.residuals.update({"admissibility": admissibility, "order_ratio": ratio})
        self.trajectory = trajectory

        report = tracker.report({"integrate.admissibility": "ode", "integrate.order_ratio": 0.0},
                                "ode")
        report.values["endpoint"] = {"z": trajectory.z[-1], "u": trajectory.u[-1]}
        report.values["samples"] = len(trajectory)
        report.values["order_ratio"] = ratio if math.isfinite(ratio) else "exact"
        return report

    def induce(self) -> ResidualReport:
        """Transport of the Lagrange structure for the rank case of the algebroid."""
        a = self.algebroid
        L = self._require_lagrangian()
        case = self.scenario.case or induction_case(a, self.points[0])
        report = induction_report(a, L, self.points, case)
        report.values["case"] = case
        if case == 2:
            report.values["N_E"] = case2_induced_connection(a, L, chern_lagrange_field(L), self.probe).N
            report.values["N_TM"] = chern_lagrange_on_TM(L, eta_point(a, self.probe))
        elif case == 3:
            induced = case3_induced_connection(a, L, chern_lagrange_field(L), self.probe)
            report.values["N_TM"] = induced.N
            report.values["metric_TM"] = induced.extras["metric_TM"]
        else:
            report.values["N_chern_lagrange"] = chern_lagrange_on_TM(L, self.probe if L.domain == "onE"
                                                                     else eta_point(a, self.probe))
        return report

    def full_report(self) -> ResidualReport:
        """Every command whose inputs are available, merged into one report."""
        report = self.validate()
        if self.lagrangian is not None:
            report.merge(self.derive_spray())
            report.merge(self.derive_connection())
            report.merge(self.integrate())
            report.merge(self.induce())
        else:
            logger.warning(f"No Lagrangian for '{self.algebroid.name}'; spray, connection and induction skipped")
        return report

    def run(self) -> ResidualReport:
        commands = {
            "validate": self.validate,
            "derive-spray": self.derive_spray,
            "derive-connection": self.derive_connection,
            "induce": self.induce,
            "integrate": self.integrate,
            "report": self.full_report,
        }
        report = commands[self.scenario.command]()
        report = self._finish(report)
        logger.info(f"{self.scenario.command} on '{self.algebroid.name}': "
                    f"{len(report.checks)} checks, {len(report.failures())} failed")
        return report

    def scenario_echo(self) -> Dict[str, Any]:
        return self.scenario.model_dump()
