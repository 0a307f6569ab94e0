"""
Scenario models and seeded point sampling.
"""
import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from config import INTEGRATION_CONFIG, REPORT_CONFIG, SAMPLING_CONFIG, TOLERANCES
from core.algebroid import AlgebroidSpec
from core.errors import ConfigError
from core.wirtinger import WPoint

logger = logging.getLogger(__name__)

COMMANDS = ("validate", "derive-spray", "derive-connection", "induce", "integrate", "report")

_ASSIGNMENT = re.compile(r"^\s*(z|u)([1-9]\d*)\s*=\s*(.+?)\s*$")


class SamplingSpec(BaseModel):
    """Annulus sampling of z and u with balls around singular loci removed."""
    points: int = Field(default=SAMPLING_CONFIG["points"], ge=1)
    seed: int = SAMPLING_CONFIG["seed"]
    radius_min: float = Field(default=SAMPLING_CONFIG["radius_min"], gt=0)
    radius_max: float = Field(default=SAMPLING_CONFIG["radius_max"], gt=0)
    exclusion_radius: float = Field(default=SAMPLING_CONFIG["exclusion_radius"], ge=0)
    max_draws_per_point: int = Field(default=SAMPLING_CONFIG["max_draws_per_point"], ge=1)

    @model_validator(mode="after")
    def _ordered_radii(self) -> "SamplingSpec":
        if self.radius_min > self.radius_max:
            raise ValueError(f"radius_min {self.radius_min} exceeds radius_max {self.radius_max}")
        return self


class ToleranceLedger(BaseModel):
    exact_ad: float = Field(default=TOLERANCES["exact_ad"], gt=0)
    metric: float = Field(default=TOLERANCES["metric"], gt=0)
    fd: float = Field(default=TOLERANCES["fd"], gt=0)
    ode: float = Field(default=TOLERANCES["ode"], gt=0)
    exact: float = Field(default=TOLERANCES["exact"], gt=0)
    transport: float = Field(default=TOLERANCES["transport"], gt=0)

    def as_dict(self) -> Dict[str, float]:
        return self.model_dump()


class Scenario(BaseModel):
    """One run of the engine: what to compute, where, and how strictly."""
    algebroid: str
    command: Literal["validate", "derive-spray", "derive-connection", "induce", "integrate", "report"] = "report"
    lagrangian: Optional[str] = None
    lagrangian_domain: Optional[Literal["onTM", "onE"]] = None
    case: Optional[Literal[1, 2, 3]] = None
    direction: Optional[Literal["E_to_TM", "TM_to_E"]] = None
    connection: Optional[str] = None
    sampling: SamplingSpec = Field(default_factory=SamplingSpec)
    tolerances: ToleranceLedger = Field(default_factory=ToleranceLedger)
    probe: Optional[str] = None
    step: float = Field(default=INTEGRATION_CONFIG["step"], gt=0)
    t_end: float = Field(default=INTEGRATION_CONFIG["t_end"], gt=0)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Scenario":
        """
        Read a scenario JSON file.

        The induction layout {algebroid, lagrangian, case, direction, points} is accepted,
        with points either a count or a sampling block.
        """
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"Cannot read scenario: {e}", str(path)) from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Malformed JSON at line {e.lineno} column {e.colno}: {e.msg}", str(path)) from e
        if not isinstance(raw, dict):
            raise ConfigError("Scenario must be a JSON object", str(path))
        points = raw.pop("points", None)
        if isinstance(points, int):
            raw.setdefault("sampling", {})["points"] = points
        elif isinstance(points, dict):
            raw["sampling"] = {**points, **raw.get("sampling", {})}
        if "case" in raw and "command" not in raw:
            raw["command"] = "induce"
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            first = e.errors()[0]
            location = ".".join(str(part) for part in first["loc"])
            raise ConfigError(f"Invalid scenario field '{location}': {first['msg']}", str(path)) from e


# ---------------------------------------------------------------------------
# Points
# ---------------------------------------------------------------------------

def _parse_complex(text: str) -> complex:
    cleaned = text.replace(" ", "").replace("i", "j")
    try:
        return complex(cleaned)
    except ValueError as e:
        raise ConfigError(f"Cannot read '{text}' as a complex number") from e


def probe_point(a: AlgebroidSpec, text: Optional[str] = None) -> WPoint:
    """
    The probe point of a report: z_k = 1, u_alpha = 2 unless overridden.

    Args:
        text: assignments such as "z1=1,u1=2+1i"
    """
    z = [complex(REPORT_CONFIG["probe_z"])] * a.n
    u = [complex(REPORT_CONFIG["probe_u"])] * a.m
    for chunk in (text or "").split(","):
        if not chunk.strip():
            continue
        match = _ASSIGNMENT.match(chunk)
        if match is None:
            raise ConfigError(f"Malformed probe assignment '{chunk}', expected e.g. z1=1")
        kind, index, value = match.group(1), int(match.group(2)), _parse_complex(match.group(3))
        target = z if kind == "z" else u
        if index > len(target):
            raise ConfigError(f"Probe variable {kind}{index} exceeds dimension {len(target)}")
        target[index - 1] = value
    return WPoint(tuple(z), tuple(u))


def singular_hyperplanes(a: AlgebroidSpec) -> List[Tuple[int, complex]]:
    loci = list(a.singular_loci)
    for chart in a.charts:
        loci.extend(chart.singular_loci)
    return loci


def _annulus(rng: np.random.Generator, count: int, spec: SamplingSpec) -> np.ndarray:
    radius = rng.uniform(spec.radius_min, spec.radius_max, count)
    angle = rng.uniform(0.0, 2.0 * np.pi, count)
    return radius * np.exp(1j * angle)


def sample_points(a: AlgebroidSpec, spec: Optional[SamplingSpec] = None,
                  extra_loci: Sequence[Tuple[int, complex]] = ()) -> List[WPoint]:
    """
    Seeded sample of points (z, u) of E.

    Every coordinate is drawn from the annulus radius_min <= |w| <= radius_max; draws whose
    z falls within exclusion_radius of a declared singular hyperplane z_k = c are rejected.

    Raises:
        ConfigError: no admissible draw within max_draws_per_point attempts
    """
    spec = spec or SamplingSpec()
    rng = np.random.default_rng(spec.seed)
    loci = singular_hyperplanes(a) + list(extra_loci)
    points: List[WPoint] = []
    rejected = 0
    for _ in range(spec.points):
        for _draw in range(spec.max_draws_per_point):
            z = _annulus(rng, a.n, spec)
            u = _annulus(rng, a.m, spec)
            if all(abs(z[k - 1] - c) >= spec.exclusion_radius for k, c in loci):
                points.append(WPoint(tuple(z), tuple(u)))
                break
            rejected += 1
        else:
            raise ConfigError(f"No admissible sample point for '{a.name}' after {spec.max_draws_per_point} draws")
    logger.debug(f"Sampled {len(points)} points for '{a.name}' (seed {spec.seed}, {rejected} rejected)")
    return points
