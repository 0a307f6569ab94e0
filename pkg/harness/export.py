"""
Report, trajectory and manifest files.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from config import REPORT_CONFIG
from core.report import ResidualReport
from core.spray import Trajectory

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """JSON-ready copy of numpy and complex values; complex numbers become [re, im]."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def report_payload(report: ResidualReport, scenario: Dict[str, Any]) -> Dict[str, Any]:
    """{"scenario", "environment", "checks" sorted by name, "values"}."""
    checks = sorted((check.model_dump() for check in report.checks), key=lambda c: c["name"])
    return _plain({
        "scenario": scenario,
        "environment": report.environment,
        "checks": checks,
        "values": report.values,
    })


def report_json(report: ResidualReport, scenario: Dict[str, Any]) -> str:
    """Deterministic serialization: sorted keys, no timestamps."""
    return json.dumps(report_payload(report, scenario), indent=REPORT_CONFIG["indent"],
                      sort_keys=REPORT_CONFIG["sort_keys"])


def write_report(report: ResidualReport, scenario: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_json(report, scenario) + "\n", encoding="utf-8")
    logger.info(f"Report written to {path}")
    return path


def write_trajectory_csv(trajectory: Trajectory, path: Union[str, Path]) -> Path:
    """Columns t, Re z1, Im z1, ..., Re u1, Im u1, ..."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trajectory.to_frame().to_csv(path, index=False)
    logger.info(f"Trajectory with {len(trajectory)} samples written to {path}")
    return path


def trajectory_manifest(trajectory: Trajectory, **extra: Any) -> Dict[str, Any]:
    manifest = {
        "method": trajectory.method,
        "step": trajectory.step,
        "samples": len(trajectory),
        "t_end": float(trajectory.times[-1]),
        "residuals": dict(trajectory.residuals),
    }
    manifest.update(extra)
    return _plain(manifest)


def write_manifest(trajectory: Trajectory, path: Union[str, Path], **extra: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(trajectory_manifest(trajectory, **extra), indent=REPORT_CONFIG["indent"],
                               sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Run manifest written to {path}")
    return path
