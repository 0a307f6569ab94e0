"""
Built-in algebroid catalog and JSON definition files.
"""
import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, field_validator

from config import CATALOG_CONFIG
from core.algebroid import AlgebroidSpec, ChartData
from core.errors import AlgebroidError, ConfigError
from core.lagrange_induction import LagrangeStructure

logger = logging.getLogger(__name__)

ComplexLike = Union[float, int, List[float]]


def _as_complex(value: ComplexLike) -> complex:
    if isinstance(value, list):
        if len(value) != 2:
            raise ValueError("Complex values are written as [re, im]")
        return complex(value[0], value[1])
    return complex(value)


# ---------------------------------------------------------------------------
# Definition file schema
# ---------------------------------------------------------------------------

class StructureEntry(BaseModel):
    gamma: int
    alpha: int
    beta: int
    expr: str


class SingularLocus(BaseModel):
    k: int = Field(ge=1)
    value: ComplexLike = 0.0


class ChartEntry(BaseModel):
    zmap: List[str]
    M: List[List[str]]
    W: Optional[List[List[str]]] = None
    inverse_zmap: Optional[List[str]] = None
    singular_loci: List[SingularLocus] = Field(default_factory=list)
    name: str = "chart"


class AlgebroidDefinition(BaseModel):
    """Schema of an algebroid definition file."""
    name: str
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    rho: List[List[str]]
    C: List[StructureEntry] = Field(default_factory=list)
    charts: List[ChartEntry] = Field(default_factory=list)
    singular_loci: List[SingularLocus] = Field(default_factory=list)
    generic_rank: Optional[int] = None
    lagrangian: Optional[str] = None

    @field_validator("rho")
    @classmethod
    def _rows_not_empty(cls, rho: List[List[str]]) -> List[List[str]]:
        if not rho or any(not row for row in rho):
            raise ValueError("rho must be a non-empty m x n grid")
        return rho

    def build(self) -> AlgebroidSpec:
        charts = [
            ChartData.from_texts(
                self.n, self.m, c.zmap, c.M, c.W, c.inverse_zmap,
                [(s.k, _as_complex(s.value)) for s in c.singular_loci], c.name,
            )
            for c in self.charts
        ]
        return AlgebroidSpec.from_texts(
            self.name, self.n, self.m, self.rho,
            [(e.gamma, e.alpha, e.beta, e.expr) for e in self.C],
            charts,
            [(s.k, _as_complex(s.value)) for s in self.singular_loci],
            self.generic_rank,
        )


def load_definition(path: Union[str, Path]) -> Tuple[AlgebroidSpec, Optional[str]]:
    """
    Read an algebroid definition file.

    Returns:
        The algebroid and the Lagrangian text declared in the file (if any)

    Raises:
        ConfigError: unreadable file, malformed JSON, schema or expression errors
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read algebroid definition: {e}", str(path)) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Malformed JSON at line {e.lineno} column {e.colno}: {e.msg}", str(path)) from e
    try:
        definition = AlgebroidDefinition.model_validate(raw)
        spec = definition.build()
    except ValidationError as e:
        raise ConfigError(f"Invalid algebroid definition: {e.errors()[0]['msg']}", str(path)) from e
    except (AlgebroidError, ValueError) as e:
        raise ConfigError(f"Invalid algebroid definition: {e}", str(path)) from e
    logger.info(f"Loaded algebroid '{spec.name}' (n={spec.n}, m={spec.m}) from {path}")
    return spec, definition.lagrangian


# ---------------------------------------------------------------------------
# Built-in entries
# ---------------------------------------------------------------------------

def _trivial() -> AlgebroidSpec:
    return AlgebroidSpec.from_texts("trivial", 1, 1, [["1"]])


def _tangent() -> AlgebroidSpec:
    return AlgebroidSpec.from_texts("tangent", 2, 2, [["1", "0"], ["0", "1"]])


def _scaled() -> AlgebroidSpec:
    return AlgebroidSpec.from_texts("scaled", 1, 1, [["z1"]], singular_loci=[(1, 0)], generic_rank=1)


def _immersion() -> AlgebroidSpec:
    return AlgebroidSpec.from_texts("immersion", 2, 1, [["1", "z1"]])


def _submersion() -> AlgebroidSpec:
    # [e1, e2] = e1 so that rho[e1, e2] = [d/dz, z d/dz]
    return AlgebroidSpec.from_texts("submersion", 1, 2, [["1"], ["z1"]], [(1, 1, 2, "1")])


def _twochart() -> AlgebroidSpec:
    inversion = ChartData.from_texts(1, 1, ["1/z1"], [["z1"]], [["1/z1"]], ["1/z1"],
                                     singular_loci=[(1, 0)], name="inversion")
    return AlgebroidSpec.from_texts("twochart", 1, 1, [["1"]], charts=[inversion], singular_loci=[(1, 0)])


def _heisenberg_like() -> AlgebroidSpec:
    return AlgebroidSpec.from_texts("heisenberg-like", 1, 3, [["1"], ["0"], ["0"]], [(3, 1, 2, "1")],
                                    generic_rank=1)


BUILTIN: Dict[str, Callable[[], AlgebroidSpec]] = {
    "trivial": _trivial,
    "tangent": _tangent,
    "scaled": _scaled,
    "immersion": _immersion,
    "submersion": _submersion,
    "twochart": _twochart,
    "heisenberg-like": _heisenberg_like,
}


def catalog() -> List[AlgebroidSpec]:
    """All built-in algebroids."""
    return [build() for build in BUILTIN.values()]


def catalog_names() -> List[str]:
    return list(BUILTIN)


def get_algebroid(name_or_path: str) -> Tuple[AlgebroidSpec, Optional[str]]:
    """
    Resolve a catalog name or a definition file path.

    Returns:
        The algebroid and its default Lagrangian text (None when there is none)
    """
    if name_or_path in BUILTIN:
        return BUILTIN[name_or_path](), CATALOG_CONFIG["default_lagrangians"].get(name_or_path)
    path = Path(name_or_path)
    if path.suffix.lower() == ".json" or path.exists():
        return load_definition(path)
    raise ConfigError(f"Unknown algebroid '{name_or_path}'; known entries: {', '.join(BUILTIN)}")


def lagrangian_domain(name: str) -> str:
    return "onTM" if name in CATALOG_CONFIG["tm_lagrangians"] else "onE"


def default_lagrangian(a: AlgebroidSpec, text: Optional[str] = None,
                       domain: Optional[str] = None) -> Optional[LagrangeStructure]:
    """The Lagrangian of a catalog entry, or one given as text, parsed on its domain."""
    text = text or CATALOG_CONFIG["default_lagrangians"].get(a.name)
    if text is None:
        return None
    domain = domain or lagrangian_domain(a.name)
    return LagrangeStructure.parse(text, domain, a.n, a.m)
