"""
Residual reports shared by every verification routine.
"""
import json
import logging
import math
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

from pydantic import BaseModel, Field

from config import TOLERANCES

logger = logging.getLogger(__name__)


class CheckResult(BaseModel):
    """Maximal residual of one identity over a batch of points."""
    name: str
    max_residual: float
    tolerance: float
    passed: bool
    ledger: Optional[str] = None
    point_of_max: Optional[Dict[str, List[List[float]]]] = None
    blocking: bool = True
    samples: int = 0
    note: Optional[str] = None


class ResidualReport(BaseModel):
    """Per-check residuals plus an echo of the run environment."""
    checks: List[CheckResult] = Field(default_factory=list)
    environment: Dict[str, Any] = Field(default_factory=dict)
    values: Dict[str, Any] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if check.blocking)

    def names(self) -> List[str]:
        return [check.name for check in self.checks]

    def get(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(check.name == name for check in self.checks)

    def add(self, result: CheckResult) -> "ResidualReport":
        if result.name in self:
            raise ValueError(f"Check '{result.name}' already present in the report")
        self.checks.append(result)
        return self

    def merge(self, other: "ResidualReport", prefix: str = "") -> "ResidualReport":
        for check in other.checks:
            self.add(check.model_copy(update={"name": f"{prefix}{check.name}"}))
        for key, value in other.values.items():
            self.values[f"{prefix}{key}"] = value
        return self

    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if check.blocking and not check.passed]

    def to_json(self, indent: int = 2) -> str:
        """Deterministic JSON: checks sorted by name, keys sorted, no timestamps."""
        payload = self.model_dump()
        payload["checks"] = sorted(payload["checks"], key=lambda c: c["name"])
        return json.dumps(payload, indent=indent, sort_keys=True, default=_json_default)


def _json_default(value: Any):
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"Cannot serialize {type(value).__name__}")


class ResidualTracker:
    """Accumulates the maximal residual of each named check."""

    def __init__(self):
        self._worst: Dict[str, float] = {}
        self._where: Dict[str, Optional[Dict[str, List[List[float]]]]] = {}
        self._count: Dict[str, int] = {}
        self._notes: Dict[str, str] = {}

    def record(self, name: str, residual: float, point: Any = None):
        residual = float(residual)
        if math.isnan(residual):
            residual = math.inf
        self._count[name] = self._count.get(name, 0) + 1
        if name not in self._worst or residual > self._worst[name]:
            self._worst[name] = residual
            self._where[name] = point.as_dict() if hasattr(point, "as_dict") else None

    def record_many(self, prefix: str, residuals: Dict[str, float], point: Any = None):
        for key, value in residuals.items():
            self.record(f"{prefix}{key}", value, point)

    def note(self, name: str, text: str):
        self._notes[name] = text

    def names(self) -> Iterable[str]:
        return list(self._worst)

    def worst(self, name: str) -> float:
        return self._worst[name]

    def report(self, tolerances: Mapping[str, Union[float, str]], default: Union[float, str],
               informational: Iterable[str] = (), ledger: Optional[Mapping[str, float]] = None) -> ResidualReport:
        """
        Turn accumulated maxima into a report.

        Args:
            tolerances: tolerance per check name (checks not listed use default); a
                string names a ledger entry and tags the check with it
            default: fallback tolerance or ledger entry
            informational: names of checks that never fail the run
            ledger: tolerance ledger for string entries (config TOLERANCES when omitted)
        """
        ledger = TOLERANCES if ledger is None else ledger
        informational = set(informational)
        report = ResidualReport()
        for name in sorted(self._worst):
            entry = tolerances.get(name, default)
            key = entry if isinstance(entry, str) else None
            tol = ledger[key] if key is not None else float(entry)
            worst = self._worst[name]
            passed = worst <= tol
            if not passed:
                logger.warning(f"Check {name} failed: residual {worst:.3e} > {tol:.1e}")
            report.add(CheckResult(
                name=name,
                max_residual=worst,
                tolerance=tol,
                passed=passed,
                ledger=key,
                point_of_max=self._where.get(name),
                blocking=name not in informational,
                samples=self._count.get(name, 0),
                note=self._notes.get(name),
            ))
        return report
