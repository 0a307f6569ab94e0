"""
Semisprays and sprays on a holomorphic Lie algebroid.

Covers the canonical spray of a regular Lagrangian, the transformation law
across charts, degree-2 homogeneity, the Liouville bracket and integral
curves of S = rho^k_alpha u^alpha d/dz^k - 2 G^alpha d/du^alpha.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import INTEGRATION_CONFIG, NUMERICS, SAMPLING_CONFIG, SPRAY_CONFIG
from core.algebroid import AlgebroidSpec, ChartData
from core.errors import (
    DimensionMismatchError,
    EvaluationDomainError,
    IntegrationAbortError,
    SingularMetricError,
)
from core.expression import Expression, VariableContext, parse, reality_check, split_variable
from core.linalg import solve, to_array, transpose
from core.report import ResidualReport, ResidualTracker
from core.vector_fields import VectorField, commutator
from core.wirtinger import Field, WPoint, second_partial

logger = logging.getLogger(__name__)


def check_lagrangian_dimensions(L: Expression, n: int, m: int):
    for name in L.variables():
        cls_name, index = split_variable(name)
        limit = n if cls_name in ("z", "zb") else m
        if index > limit:
            raise DimensionMismatchError(f"Lagrangian uses '{name}' but the algebroid has n={n}, m={m}")


def fiber_metric(L: Field, env: Mapping[str, Any], m: int) -> List[List[Any]]:
    """H[gamma][beta] = d^2 L / du^gamma d ub^beta."""
    return [[second_partial(L, env, f"u{g + 1}", f"ub{b + 1}") for b in range(m)] for g in range(m)]


def metric_condition(H: Sequence[Sequence[Any]]) -> Tuple[complex, float]:
    values = to_array(H)
    return complex(np.linalg.det(values)), float(np.linalg.cond(values))


def canonical_spray_components(a: AlgebroidSpec, L: Field, chart: Optional[ChartData] = None) -> Tuple[Field, ...]:
    """
    Canonical spray coefficients as derived evaluators.

    G^alpha = 1/2 g^{beta alpha} d^2L/dz^k dub^beta rho^k_gamma u^gamma, plus
    1/4 W^alpha_eps dM^eps_beta/dz^k u^beta rho^k_gamma u^gamma when a chart is given.
    """
    n, m = a.n, a.m

    def evaluate_all(env: Mapping[str, Any]) -> List[Any]:
        H = fiber_metric(L, env, m)
        det, cond = metric_condition(H)
        logger.debug(f"Fiber metric condition number {cond:.3e} (|det| = {abs(det):.3e})")
        if abs(det) < NUMERICS["singular_metric_det"]:
            raise SingularMetricError(f"Fiber metric is singular (|det| = {abs(det):.3e})", det)
        rho = a.rho_values(env)
        u = [env[f"u{g + 1}"] for g in range(m)]
        flow = [sum((rho[g][k] * u[g] for g in range(m)), 0j) for k in range(n)]
        rhs = [sum((second_partial(L, env, f"z{k + 1}", f"ub{b + 1}") * flow[k] for k in range(n)), 0j)
               for b in range(m)]
        G = [0.5 * x for x in solve(transpose(H), rhs)]
        if chart is not None:
            W = chart.W_values(env)
            dM = chart.dM(env)
            for al in range(m):
                G[al] = G[al] + 0.25 * sum((W[al][e] * dM[k][e][b] * u[b] * flow[k]
                                            for e in range(m) for b in range(m) for k in range(n)), 0j)
        return G

    return tuple((lambda env, al=al: evaluate_all(env)[al]) for al in range(m))


@dataclass(frozen=True)
class SprayField:
    """Semispray coefficients G^alpha on the total space of an algebroid."""
    G: Tuple[Field, ...]
    algebroid: AlgebroidSpec
    lagrangian: Optional[Expression] = None
    chart: Optional[ChartData] = None
    label: str = "explicit"

    def __post_init__(self):
        if len(self.G) != self.algebroid.m:
            raise DimensionMismatchError(f"Semispray needs {self.algebroid.m} components, got {len(self.G)}")

    @property
    def m(self) -> int:
        return self.algebroid.m

    @classmethod
    def from_texts(cls, a: AlgebroidSpec, texts: Sequence[str]) -> "SprayField":
        ctx = VariableContext.total(a.n, a.m)
        return cls(tuple(parse(t, ctx) for t in texts), a)

    @classmethod
    def from_lagrangian(cls, a: AlgebroidSpec, L: Expression, chart: Optional[ChartData] = None) -> "SprayField":
        check_lagrangian_dimensions(L, a.n, a.m)
        return cls(canonical_spray_components(a, L, chart), a, L, chart, "canonical")

    def values(self, env: Mapping[str, Any]) -> List[Any]:
        return [g(env) for g in self.G]

    def at(self, p: WPoint) -> np.ndarray:
        return np.array([complex(v) for v in self.values(p.env())])

    def vector_field(self) -> VectorField:
        """S as a vector field on the coordinates (z, u) of E."""
        a = self.algebroid
        components: Dict[str, Any] = {}
        for k in range(a.n):
            components[f"z{k + 1}"] = lambda env, k=k: sum(
                (a.rho[al][k](env) * env[f"u{al + 1}"] for al in range(a.m)), 0j)
        for al in range(a.m):
            components[f"u{al + 1}"] = lambda env, g=self.G[al]: -2 * g(env)
        return VectorField(components)

    def transport(self, chart: ChartData) -> "SprayField":
        """The semispray in the target chart; Lagrangian sprays are rebuilt from the transported Lagrangian."""
        target = self.algebroid.transport(chart)
        if self.lagrangian is not None:
            return SprayField.from_lagrangian(target, chart.pullback_function(self.lagrangian))
        return SprayField(self.G, target, None, None, self.label)


def canonical_spray(a: AlgebroidSpec, L: Expression, chart: Optional[ChartData], p: WPoint) -> np.ndarray:
    """
    Canonical spray G^alpha of a regular Lagrangian at a point.

    Args:
        a: Algebroid data
        L: Real Lagrangian in (z, zb, u, ub)
        chart: Optional transition whose W dM term is included
        p: Evaluation point

    Returns:
        Complex vector of G^alpha

    Raises:
        RealityCheckError: L is not real at p
        SingularMetricError: the fiber metric is singular at p
    """
    reality_check(L, [p], NUMERICS["reality_tol"])
    return SprayField.from_lagrangian(a, L, chart).at(p)


def semispray_change_residual(S: SprayField, chart: ChartData, points: Sequence[WPoint],
                              S_target: Optional[SprayField] = None) -> ResidualReport:
    """
    Residual of G~^alpha - M^alpha_beta G^beta + 1/2 dM^alpha_beta/dz^k u^beta rho^k_gamma u^gamma.

    The horizontal part rho^k_alpha u^alpha is checked against the induced-coordinate law.
    """
    a = S.algebroid
    target = S_target or S.transport(chart)
    tracker = ResidualTracker()
    for p in points:
        env = p.env()
        J = chart.check_jacobian(env)
        mapped = chart.map_point(p)
        M = to_array(chart.M_values(env))
        dM = chart.dM(env)
        u = np.array(p.u, dtype=complex)
        flow = a.anchor_matrix(p) @ u
        correction = 0.5 * sum(to_array(dM[k]) @ u * flow[k] for k in range(a.n))
        residual = target.at(mapped) - M @ S.at(p) + correction
        tracker.record("semispray.vertical_law", float(np.max(np.abs(residual))), p)
        flow_target = target.algebroid.anchor_matrix(mapped) @ np.array(mapped.u, dtype=complex)
        tracker.record("semispray.horizontal_law", float(np.max(np.abs(flow_target - J @ flow))), p)
    report = tracker.report({}, "metric")
    report.environment["chart"] = chart.name
    return report


def homogeneity_residual(S: SprayField, p: WPoint, lambdas: Optional[Sequence[complex]] = None) -> float:
    """max over lambda of |G(z, lambda u) - lambda^2 G(z, u)|."""
    lambdas = SPRAY_CONFIG["homogeneity_lambdas"] if lambdas is None else lambdas
    base = S.at(p)
    worst = 0.0
    for lam in lambdas:
        scaled = S.at(p.with_fiber(tuple(lam * x for x in p.u)))
        worst = max(worst, float(np.max(np.abs(scaled - lam ** 2 * base))))
    return worst


def is_spray(S: SprayField, points: Sequence[WPoint]) -> bool:
    return all(homogeneity_residual(S, p) <= SPRAY_CONFIG["spray_tolerance"] for p in points)


def liouville_field(m: int) -> VectorField:
    """L = u^alpha d/du^alpha."""
    return VectorField({f"u{al + 1}": (lambda env, al=al: env[f"u{al + 1}"]) for al in range(m)})


def liouville_bracket_residual(S: SprayField, p: WPoint) -> float:
    """max component deviation of [L, S] from S."""
    env = p.env()
    bracket = commutator(liouville_field(S.m), S.vector_field()).values(env)
    spray = S.vector_field().values(env)
    return max(abs(complex(bracket.get(var, 0j)) - complex(value)) for var, value in spray.items())


# ---------------------------------------------------------------------------
# Integral curves
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Samples (t, z(t), u(t)) of an integral curve."""
    times: np.ndarray
    z: np.ndarray
    u: np.ndarray
    step: float
    method: str = "rk4"
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def samples(self) -> List[Tuple[float, np.ndarray, np.ndarray]]:
        return [(float(t), self.z[i], self.u[i]) for i, t in enumerate(self.times)]

    def __len__(self) -> int:
        return len(self.times)

    def endpoint(self) -> WPoint:
        return WPoint(tuple(self.z[-1]), tuple(self.u[-1]))

    def to_frame(self) -> pd.DataFrame:
        columns = {"t": self.times}
        for k in range(self.z.shape[1]):
            columns[f"Re z{k + 1}"] = self.z[:, k].real
            columns[f"Im z{k + 1}"] = self.z[:, k].imag
        for al in range(self.u.shape[1]):
            columns[f"Re u{al + 1}"] = self.u[:, al].real
            columns[f"Im u{al + 1}"] = self.u[:, al].imag
        return pd.DataFrame(columns)


def _state_point(y: np.ndarray, n: int) -> WPoint:
    return WPoint(tuple(y[:n]), tuple(y[n:]))


def integrate(S: SprayField, x0: WPoint, t_end: Optional[float] = None, step: Optional[float] = None,
              exclusion_radius: Optional[float] = None) -> Trajectory:
    """
    Classical RK4 on dz^k/dt = rho^k_alpha u^alpha, du^alpha/dt = -2 G^alpha.

    Args:
        S: Semispray
        x0: Initial point (z, u)
        t_end: Final real parameter
        step: Requested step; the grid is uniform and ends exactly at t_end
        exclusion_radius: Abort when z comes this close to a singular locus

    Returns:
        Trajectory including t = 0 and t = t_end

    Raises:
        IntegrationAbortError: non-finite state, evaluation failure or singular proximity
    """
    t_end = INTEGRATION_CONFIG["t_end"] if t_end is None else t_end
    step = INTEGRATION_CONFIG["step"] if step is None else step
    radius = SAMPLING_CONFIG["exclusion_radius"] if exclusion_radius is None else exclusion_radius
    if step <= 0 or t_end <= 0:
        raise ValueError(f"Step and t_end must be positive, got step={step}, t_end={t_end}")
    a = S.algebroid
    n = a.n
    if x0.n != n or x0.m != a.m:
        raise DimensionMismatchError(f"Initial point has (n, m) = ({x0.n}, {x0.m}), expected ({n}, {a.m})")

    count = max(1, int(math.ceil(t_end / step - 1e-9)))
    times = np.linspace(0.0, t_end, count + 1)
    dt = times[1] - times[0]
    vector_field = S.vector_field()
    order = [f"z{k + 1}" for k in range(n)] + [f"u{al + 1}" for al in range(a.m)]

    def rhs(y: np.ndarray) -> np.ndarray:
        values = vector_field.values(_state_point(y, n).env())
        return np.array([complex(values[var]) for var in order])

    y = np.array(x0.z + x0.u, dtype=complex)
    states = [y.copy()]
    logger.info(f"Integrating '{S.label}' spray on '{a.name}' with {count} RK4 steps of {dt:.3e}")
    for i in range(count):
        t = times[i]
        try:
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * dt * k1)
            k3 = rhs(y + 0.5 * dt * k2)
            k4 = rhs(y + dt * k3)
        except (EvaluationDomainError, ValueError, ArithmeticError) as e:
            raise IntegrationAbortError(f"evaluation failed: {e}", float(t))
        y = y + dt * (k1 + 2 * (k2 + k3) + k4) / 6
        if not np.all(np.isfinite(y)):
            raise IntegrationAbortError("non-finite state", float(t))
        if a.near_singular(_state_point(y, n), radius):
            raise IntegrationAbortError("trajectory entered a singular locus ball", float(t))
        states.append(y.copy())

    states = np.array(states)
    return Trajectory(times, states[:, :n], states[:, n:], float(dt))


def _fourth_order_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """d/dt of uniformly sampled rows by five-point stencils."""
    count = len(values)
    if count < 5:
        raise ValueError("At least five samples are needed for fourth-order differences")
    d = np.empty_like(values)
    d[2:-2] = (-values[4:] + 8 * values[3:-1] - 8 * values[1:-3] + values[:-4]) / (12 * h)
    d[0] = (-25 * values[0] + 48 * values[1] - 36 * values[2] + 16 * values[3] - 3 * values[4]) / (12 * h)
    d[1] = (-3 * values[0] - 10 * values[1] + 18 * values[2] - 6 * values[3] + values[4]) / (12 * h)
    d[-1] = (25 * values[-1] - 48 * values[-2] + 36 * values[-3] - 16 * values[-4] + 3 * values[-5]) / (12 * h)
    d[-2] = (3 * values[-1] + 10 * values[-2] - 18 * values[-3] + 6 * values[-4] - values[-5]) / (12 * h)
    return d


def admissibility_residual(trajectory: Trajectory, a: AlgebroidSpec) -> float:
    """max over samples of |dz/dt - rho(z) u|."""
    dz = _fourth_order_derivative(trajectory.z, trajectory.step)
    worst = 0.0
    for i in range(len(trajectory)):
        p = WPoint(tuple(trajectory.z[i]), tuple(trajectory.u[i]))
        worst = max(worst, float(np.max(np.abs(dz[i] - a.anchor_matrix(p) @ trajectory.u[i]))))
    return worst


def rk4_order_ratio(S: SprayField, x0: WPoint, t_end: float, step: float) -> float:
    """Endpoint error at step over error at step/2, both against a step/8 reference."""
    def endpoint(h: float) -> np.ndarray:
        result = integrate(S, x0, t_end, h)
        return np.concatenate([result.z[-1], result.u[-1]])

    reference = endpoint(step / 8)
    coarse = np.max(np.abs(endpoint(step) - reference))
    fine = np.max(np.abs(endpoint(step / 2) - reference))
    if coarse <= INTEGRATION_CONFIG["exact_error"]:
        logger.info(f"RK4 endpoint error {coarse:.3e} is at roundoff level; run is integrated exactly")
        return math.inf
    ratio = float(coarse / fine)
    logger.info(f"RK4 error ratio {ratio:.2f} (coarse {coarse:.3e}, fine {fine:.3e})")
    return ratio
