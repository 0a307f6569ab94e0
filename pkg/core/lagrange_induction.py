"""
Chern-Lagrange connections and the transport of Lagrange structures between
T'M and E along the anchor.

Case I: m = n with invertible anchor. Case II: rank rho = m < n, completed by a
metric-orthonormal frame on T'M. Case III: rank rho = n < m, completed by
normal covectors on E.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from config import NUMERICS
from core.algebroid import AlgebroidSpec, ChartData, anchor_rank
from core.errors import (
    DimensionMismatchError,
    SingularAnchorError,
    SingularMetricError,
    UnsupportedInputError,
)
from core.expression import Expression, VariableContext, combine, expression_sum, parse, reality_check
from core.linalg import (
    hermitian_residual,
    inverse,
    is_positive_definite,
    metric_gram_schmidt,
    rank,
    solve,
    to_array,
    transpose,
)
from core.report import ResidualReport, ResidualTracker
from core.tangent_geometry import ConnectionField, tangent_pushforward
from core.wirtinger import Field, WPoint, directional_second, partial, second_partial

logger = logging.getLogger(__name__)

DOMAINS = ("onTM", "onE")
DIRECTIONS = ("E_to_TM", "TM_to_E")


@dataclass(frozen=True)
class LagrangeStructure:
    """A real Lagrangian on T'M (variables z, eta) or on E (variables z, u)."""
    L: Expression
    domain: str
    n: int
    m: int

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"Unknown Lagrangian domain '{self.domain}'")
        if self.domain == "onTM" and self.m != self.n:
            raise DimensionMismatchError("A Lagrangian on T'M has fiber dimension n")

    @classmethod
    def parse(cls, text: str, domain: str, n: int, m: Optional[int] = None) -> "LagrangeStructure":
        fiber = n if domain == "onTM" else m
        if fiber is None:
            raise DimensionMismatchError("Fiber rank is required for a Lagrangian on E")
        return cls(parse(text, VariableContext.total(n, fiber)), domain, n, fiber)

    def reality(self, points: Sequence[Any]) -> float:
        return reality_check(self.L, points, NUMERICS["reality_tol"])

    def transport(self, chart: ChartData) -> "LagrangeStructure":
        """L~(z~, u~) = L(z(z~), W u~)."""
        if self.domain != "onE":
            raise UnsupportedInputError("Only Lagrangians on E are transported across algebroid charts")
        return LagrangeStructure(chart.pullback_function(self.L), "onE", self.n, self.m)


@dataclass
class MetricData:
    """Fiber metric g_{i jbar} = d^2L/deta^i deta-bar^j at a point."""
    matrix: np.ndarray
    inverse: np.ndarray
    condition: float
    hermitian_residual: float
    rank: int


@dataclass
class FrameCompletion:
    """
    Completion of the anchor to a frame at a point.

    Case II: frame = [rho | Y] on T'M, rows of frame_inverse are rho^alpha_i then Y^a_i.
    Case III: frame = [rho ; Y] on E, columns of frame_inverse are rho^alpha_k then Y^alpha_a.
    """
    case: int
    Y: np.ndarray
    frame: np.ndarray
    frame_inverse: np.ndarray
    gram: np.ndarray
    residuals: Dict[str, float] = field(default_factory=dict)


@dataclass
class InductionResult:
    """Induced connection values plus companion data and residuals."""
    case: int
    N: np.ndarray
    completion: Optional[FrameCompletion] = None
    extras: Dict[str, np.ndarray] = field(default_factory=dict)
    residuals: Dict[str, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Metrics and Chern-Lagrange connections
# ---------------------------------------------------------------------------

def _fiber_dim(L: LagrangeStructure) -> int:
    return L.n if L.domain == "onTM" else L.m


def metric_values(L: Field, env: Mapping[str, Any], r: int) -> List[List[Any]]:
    return [[second_partial(L, env, f"u{i + 1}", f"ub{j + 1}") for j in range(r)] for i in range(r)]


def _require_regular(H: Sequence[Sequence[Any]]) -> complex:
    det = complex(np.linalg.det(to_array(H)))
    if abs(det) < NUMERICS["singular_metric_det"]:
        raise SingularMetricError(f"Lagrangian metric is singular (|det| = {abs(det):.3e})", det)
    return det


def metric_from_lagrangian(L: LagrangeStructure, p: WPoint) -> MetricData:
    """
    Hermitian fiber metric of a Lagrangian and its inverse.

    Raises:
        SingularMetricError: |det g| below the singular-metric threshold
    """
    r = _fiber_dim(L)
    if p.m != r:
        raise DimensionMismatchError(f"Point has fiber dimension {p.m}, Lagrangian expects {r}")
    H = metric_values(L.L, p.env(), r)
    _require_regular(H)
    G = to_array(H)
    residual = hermitian_residual(G)
    if residual > NUMERICS["reality_tol"]:
        logger.warning(f"Metric is not Hermitian at {p.as_dict()}: residual {residual:.3e}")
    condition = float(np.linalg.cond(G))
    logger.debug(f"Metric condition number {condition:.3e}")
    return MetricData(G, np.linalg.inv(G), condition, residual, rank(G, NUMERICS["pivot_tol"]))


def chern_lagrange_values(L: Field, env: Mapping[str, Any], n: int, r: int) -> List[List[Any]]:
    """N[i][k] = g^{jbar i} d^2L/dz^k deta-bar^j, generic over the scalar algebra."""
    H = metric_values(L, env, r)
    _require_regular(H)
    HT = transpose(H)
    N: List[List[Any]] = [[0j] * n for _ in range(r)]
    for k in range(n):
        b = [second_partial(L, env, f"z{k + 1}", f"ub{j + 1}") for j in range(r)]
        column = solve(HT, b)
        for i in range(r):
            N[i][k] = column[i]
    return N


def chern_lagrange_on_TM(L: LagrangeStructure, p: WPoint) -> np.ndarray:
    """Chern-Lagrange connection N^i_k on T'M (or N^alpha_k for a Lagrangian on E)."""
    return to_array(chern_lagrange_values(L.L, p.env(), L.n, _fiber_dim(L)))


def chern_lagrange_field(L: LagrangeStructure) -> ConnectionField:
    """The Chern-Lagrange connection as a ConnectionField evaluator."""
    n, r = L.n, _fiber_dim(L)

    def entry(i, k):
        return lambda env: chern_lagrange_values(L.L, env, n, r)[i][k]

    kind = "onTM" if L.domain == "onTM" else "onTE"
    return ConnectionField(kind, tuple(tuple(entry(i, k) for k in range(n)) for i in range(r)), n, L.m)


# ---------------------------------------------------------------------------
# Case I: invertible anchor
# ---------------------------------------------------------------------------

def pullback_lagrangian(a: AlgebroidSpec, L: LagrangeStructure) -> LagrangeStructure:
    """L*(z, u) = L(z, rho(z) u)."""
    if L.domain != "onTM" or L.n != a.n:
        raise DimensionMismatchError("Pullback needs a Lagrangian on T'M over the algebroid base")
    ctx = VariableContext.total(a.n, a.m)
    mapping = {}
    for i in range(a.n):
        terms = [combine("*", a.rho[al][i], Expression.variable(f"u{al + 1}", ctx), ctx) for al in range(a.m)]
        eta = expression_sum(terms, ctx)
        mapping[f"u{i + 1}"] = eta
        mapping[f"ub{i + 1}"] = eta.conjugate()
    return LagrangeStructure(L.L.substitute(mapping, ctx), "onE", a.n, a.m)


def eta_point(a: AlgebroidSpec, p: WPoint) -> WPoint:
    """(z, u) -> (z, eta = rho u)."""
    return WPoint(p.z, tuple(a.anchor_matrix(p) @ np.array(p.u, dtype=complex)))


def _require_invertible_anchor(a: AlgebroidSpec, p: WPoint) -> np.ndarray:
    if a.n != a.m:
        raise SingularAnchorError(f"Case I needs a square anchor, '{a.name}' has n={a.n}, m={a.m}", -1)
    R = a.anchor_matrix(p)
    if abs(np.linalg.det(R)) <= NUMERICS["jacobian_det"]:
        raise SingularAnchorError(f"Anchor of '{a.name}' is singular at {p.z}", rank(R, NUMERICS["pivot_tol"]))
    return R


@dataclass
class Case1Pullback:
    L_star: complex
    metric: np.ndarray
    metric_from_anchor: np.ndarray
    N: np.ndarray
    residuals: Dict[str, float] = field(default_factory=dict)


def case1_pullback(a: AlgebroidSpec, L: LagrangeStructure, p: WPoint) -> Case1Pullback:
    """
    Pull a T'M Lagrangian back to E along an invertible anchor.

    Returns:
        L*(z, u), g_{alpha betabar} by differentiation of L*, the same metric as
        rho^i_alpha conj(rho^j_beta) g_{i jbar}, and the Chern-Lagrange connection of L*
    """
    R = _require_invertible_anchor(a, p)
    L_star = pullback_lagrangian(a, L)
    env = p.env()
    g_E = metric_from_lagrangian(L_star, p).matrix
    g_TM = metric_from_lagrangian(L, eta_point(a, p)).matrix
    from_anchor = R.T @ g_TM @ R.conj()
    N = chern_lagrange_on_TM(L_star, p)
    result = Case1Pullback(complex(L_star.L(env)), g_E, from_anchor, N)
    result.residuals["metric_pullback"] = float(np.max(np.abs(g_E - from_anchor)))
    return result


def _inverse_anchor_field(a: AlgebroidSpec, alpha: int, h: int) -> Field:
    """(rho^-1)^alpha_h as a field of z."""
    def value(env):
        rho = a.rho_values(env)
        return inverse([[rho[al][k] for al in range(a.m)] for k in range(a.n)])[alpha][h]
    return value


def case1_connection_transport(a: AlgebroidSpec, N: ConnectionField, direction: str, p: WPoint) -> np.ndarray:
    """
    Transport a nonlinear connection along an invertible anchor.

    E_to_TM: N*^h_k = rho^h_alpha N^alpha_k - drho^h_alpha/dz^k u^alpha
    TM_to_E: N*^alpha_k = rho^alpha_h N^h_k - drho^alpha_h/dz^k eta^h, rho^alpha_h the inverse matrix

    Args:
        p: point (z, u) of E; T'M data is evaluated at eta = rho u
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"Direction must be one of {DIRECTIONS}")
    R = _require_invertible_anchor(a, p)
    env = p.env()
    n = a.n
    if direction == "E_to_TM":
        if N.kind != "onTE":
            raise DimensionMismatchError("E_to_TM transport expects a connection onTE")
        u = np.array(p.u, dtype=complex)
        drift = np.array([[sum(complex(partial(a.rho[al][h], env, f"z{k + 1}")) * u[al] for al in range(a.m))
                           for k in range(n)] for h in range(n)])
        return R @ N.value_array(p) - drift
    if N.kind != "onTM":
        raise DimensionMismatchError("TM_to_E transport expects a connection onTM")
    q = eta_point(a, p)
    eta = np.array(q.u, dtype=complex)
    R_inv = np.linalg.inv(R)
    drift = np.array([[sum(complex(partial(_inverse_anchor_field(a, al, h), env, f"z{k + 1}")) * eta[h]
                           for h in range(n)) for k in range(n)] for al in range(a.m)])
    return R_inv @ N.value_array(q) - drift


def case1_round_trip_residual(a: AlgebroidSpec, N: ConnectionField, points: Sequence[WPoint]) -> float:
    """E -> T'M -> E on connection coefficients."""
    worst = 0.0
    for p in points:
        to_tm = case1_connection_transport(a, N, "E_to_TM", p)
        q = eta_point(a, p)
        frozen = tuple(tuple((lambda env, v=complex(to_tm[h, k]): v) for k in range(a.n)) for h in range(a.n))
        constant = ConnectionField("onTM", frozen, a.n, a.n)
        back = case1_connection_transport(a, constant, "TM_to_E", p)
        residual = float(np.max(np.abs(back - N.value_array(p))))
        worst = max(worst, residual)
        logger.debug(f"Round trip at {q.z}: {residual:.3e}")
    return worst


# ---------------------------------------------------------------------------
# Case II: rank rho = m < n
# ---------------------------------------------------------------------------

def _default_seed_order(dim: int, reverse: bool) -> List[int]:
    order = list(range(dim))
    return order[::-1] if reverse else order


def case2_completion(a: AlgebroidSpec, L: LagrangeStructure, p: WPoint,
                     seed_order: Optional[Sequence[int]] = None, pivoting: bool = True) -> FrameCompletion:
    """
    Metric-orthonormal completion Y^i_a of span{rho_alpha} in T'M.

    Raises:
        SingularAnchorError: rank rho differs from m at p
        UnsupportedInputError: the metric is not positive-definite
    """
    n, m = a.n, a.m
    if m >= n:
        raise DimensionMismatchError(f"Case II needs m < n, '{a.name}' has n={n}, m={m}")
    R = a.anchor_matrix(p)
    if rank(R, NUMERICS["pivot_tol"]) != m:
        raise SingularAnchorError(f"Anchor of '{a.name}' is rank deficient at {p.z}", rank(R, NUMERICS["pivot_tol"]))
    G = metric_from_lagrangian(L, eta_point(a, p)).matrix
    if not is_positive_definite(G):
        raise UnsupportedInputError("Metric is not positive-definite; orthonormal completion is impossible")
    Y = metric_gram_schmidt(R, G, n - m, seed_order, pivoting, NUMERICS["pivot_tol"])
    frame = np.hstack([R, Y])
    frame_inverse = np.linalg.inv(frame)
    rho_inv, Y_inv = frame_inverse[:m], frame_inverse[m:]
    completion = FrameCompletion(2, Y, frame, frame_inverse, G)
    completion.residuals.update({
        "orthogonality": float(np.max(np.abs(Y.T @ G @ R.conj()))),
        "normality": float(np.max(np.abs(Y.T @ G @ Y.conj() - np.eye(n - m)))),
        "left_inverse": float(np.max(np.abs(rho_inv @ R - np.eye(m)))),
        "annihilation": float(np.max(np.abs(rho_inv @ Y))),
        "completeness": float(np.max(np.abs(R @ rho_inv + Y @ Y_inv - np.eye(n)))),
    })
    return completion


def case2_induced_connection(a: AlgebroidSpec, L: LagrangeStructure, N_TM: ConnectionField, p: WPoint,
                             completion: Optional[FrameCompletion] = None) -> InductionResult:
    """
    N^alpha_h = rho^alpha_k (N^k_h + u^beta drho^k_beta/dz^h).

    Also evaluates H^j_h = N^j_h + u^beta drho^j_beta/dz^h and the frame relation
    rho_*(delta*_h) = delta_h + Y^j_a Y^a_k H^k_h d/deta^j.
    """
    if N_TM.kind != "onTM":
        raise DimensionMismatchError("Case II expects a connection onTM")
    completion = completion or case2_completion(a, L, p)
    n, m = a.n, a.m
    env = p.env()
    q = eta_point(a, p)
    u = np.array(p.u, dtype=complex)
    w = np.array([[sum(u[be] * complex(partial(a.rho[be][j], env, f"z{h + 1}")) for be in range(m))
                   for h in range(n)] for j in range(n)])                  # w[j][h] = u^b d_h rho^j_b
    N_values = N_TM.value_array(q)
    H = N_values + w
    rho_inv = completion.frame_inverse[:m]
    Y, Y_inv = completion.Y, completion.frame_inverse[m:]
    N_E = rho_inv @ H

    frame_gap = 0.0
    for h in range(n):
        horizontal = np.zeros(n, dtype=complex)
        horizontal[h] = 1.0
        Z_out, V_out = tangent_pushforward(a, p, horizontal, -N_E[:, h])
        expected = -N_values[:, h] + Y @ (Y_inv @ H[:, h])
        frame_gap = max(frame_gap, float(np.max(np.abs(Z_out - horizontal))),
                        float(np.max(np.abs(V_out - expected))))
    result = InductionResult(2, N_E, completion, {"H": H})
    result.residuals["frame_relation"] = frame_gap
    result.residuals.update({f"completion.{k}": v for k, v in completion.residuals.items()})
    return result


def chern_lagrange_coincidence_residual(a: AlgebroidSpec, L: LagrangeStructure, p: WPoint,
                                        completion: Optional[FrameCompletion] = None) -> float:
    """Case II output for the Chern-Lagrange connection of L against the Chern-Lagrange connection of L*."""
    induced = case2_induced_connection(a, L, chern_lagrange_field(L), p, completion).N
    direct = chern_lagrange_on_TM(pullback_lagrangian(a, L), p)
    return float(np.max(np.abs(induced - direct)))


# ---------------------------------------------------------------------------
# Case III: rank rho = n < m
# ---------------------------------------------------------------------------

def case3_completion(a: AlgebroidSpec, L: LagrangeStructure, p: WPoint,
                     seed_order: Optional[Sequence[int]] = None, pivoting: bool = True) -> FrameCompletion:
    """
    Normal covectors Y^a_alpha completing the rows rho^k_alpha, orthonormal for g^{betabar alpha}.

    Raises:
        SingularAnchorError: rank rho differs from n at p
        UnsupportedInputError: the fiber metric is not positive-definite
    """
    n, m = a.n, a.m
    if n >= m:
        raise DimensionMismatchError(f"Case III needs n < m, '{a.name}' has n={n}, m={m}")
    if L.domain != "onE":
        raise DimensionMismatchError("Case III needs a Lagrangian on E")
    R = a.anchor_matrix(p)                            # n x m, rows are the covectors rho^k
    if rank(R, NUMERICS["pivot_tol"]) != n:
        raise SingularAnchorError(f"Anchor of '{a.name}' is rank deficient at {p.z}", rank(R, NUMERICS["pivot_tol"]))
    H = metric_from_lagrangian(L, p).matrix
    if not is_positive_definite(H):
        raise UnsupportedInputError("Fiber metric is not positive-definite; normal completion is impossible")
    Q = np.linalg.inv(H.T)                            # g^{betabar alpha} as Q[alpha][beta]
    Y = metric_gram_schmidt(R.T, Q, m - n, seed_order, pivoting, NUMERICS["pivot_tol"]).T   # (m-n) x m
    frame = np.vstack([R, Y])
    frame_inverse = np.linalg.inv(frame)
    X = frame_inverse[:, :n]
    completion = FrameCompletion(3, Y, frame, frame_inverse, Q)
    completion.residuals.update({
        "orthogonality": float(np.max(np.abs(Y @ Q @ R.conj().T))),
        "normality": float(np.max(np.abs(Y @ Q @ Y.conj().T - np.eye(m - n)))),
        "right_inverse": float(np.max(np.abs(R @ X - np.eye(n)))),
        "completeness": float(np.max(np.abs(frame_inverse @ frame - np.eye(m)))),
    })
    return completion


def frozen_frame_lagrangian(a: AlgebroidSpec, L: LagrangeStructure, p: WPoint, X: np.ndarray) -> Field:
    """
    L*(z, eta) = L(z, u0 + X (eta - rho(z) u0)) on T'M with the frame X frozen at p.

    At eta = rho(z0) u0 this reproduces u0, and its first z-derivatives follow the anchor.
    """
    n, m = a.n, a.m
    u0 = [complex(v) for v in p.u]
    X = [[complex(v) for v in row] for row in np.asarray(X)]
    X_bar = [[v.conjugate() for v in row] for row in X]

    def value(env):
        rho = a.rho_values(env)
        rho_bar = [[e(env) for e in row] for row in a.rho_bar]
        shift = [env[f"u{i + 1}"] - sum((rho[al][i] * u0[al] for al in range(m)), 0j) for i in range(n)]
        shift_bar = [env[f"ub{i + 1}"] - sum((rho_bar[al][i] * u0[al].conjugate() for al in range(m)), 0j)
                     for i in range(n)]
        lifted = {f"z{k + 1}": env[f"z{k + 1}"] for k in range(n)}
        lifted.update({f"zb{k + 1}": env[f"zb{k + 1}"] for k in range(n)})
        for al in range(m):
            lifted[f"u{al + 1}"] = u0[al] + sum((X[al][i] * shift[i] for i in range(n)), 0j)
            lifted[f"ub{al + 1}"] = u0[al].conjugate() + sum((X_bar[al][i] * shift_bar[i] for i in range(n)), 0j)
        return L.L(lifted)

    return value


def case3_induced_connection(a: AlgebroidSpec, L: LagrangeStructure, N_E: ConnectionField, p: WPoint,
                             completion: Optional[FrameCompletion] = None) -> InductionResult:
    """
    N^k_h = rho^k_alpha N^alpha_h - u^alpha drho^k_alpha/dz^h on T'M.

    Companion outputs: the coframe dv^k = rho^k_alpha du^alpha, the completion, the
    induced metric g_{i jbar} (matrix product and directional derivatives along the frame)
    and its rank, and the frame identities rho_*(delta*_h) = delta_h, rho_*(rho^alpha_k d/du^alpha) = d/deta^k.
    """
    if N_E.kind != "onTE":
        raise DimensionMismatchError("Case III expects a connection onTE")
    completion = completion or case3_completion(a, L, p)
    n, m = a.n, a.m
    env = p.env()
    R = a.anchor_matrix(p)
    u = np.array(p.u, dtype=complex)
    w = np.array([[sum(u[al] * complex(partial(a.rho[al][k], env, f"z{h + 1}")) for al in range(m))
                   for h in range(n)] for k in range(n)])
    N_values = N_E.value_array(p)
    N_TM = R @ N_values - w

    X = completion.frame_inverse[:, :n]
    H = metric_from_lagrangian(L, p).matrix
    g_product = X.T @ H @ X.conj()
    g_directional = np.array([[complex(directional_second(
        L.L, env,
        {f"u{al + 1}": X[al, i] for al in range(m)},
        {f"ub{be + 1}": X[be, j].conjugate() for be in range(m)})) for j in range(n)] for i in range(n)])

    horizontal_gap, vertical_gap = 0.0, 0.0
    for h in range(n):
        e_h = np.zeros(n, dtype=complex)
        e_h[h] = 1.0
        Z_out, V_out = tangent_pushforward(a, p, e_h, -N_values[:, h])
        horizontal_gap = max(horizontal_gap, float(np.max(np.abs(Z_out - e_h))),
                             float(np.max(np.abs(V_out + N_TM[:, h]))))
        Z_out, V_out = tangent_pushforward(a, p, np.zeros(n), X[:, h])
        vertical_gap = max(vertical_gap, float(np.max(np.abs(Z_out))), float(np.max(np.abs(V_out - e_h))))

    result = InductionResult(3, N_TM, completion, {
        "coframe": R,
        "frame_inverse": completion.frame_inverse,
        "metric_TM": g_product,
    })
    result.residuals.update({
        "frame_horizontal": horizontal_gap,
        "frame_vertical": vertical_gap,
        "metric_directional": float(np.max(np.abs(g_product - g_directional))),
        "metric_rank_deficit": float(n - rank(g_product, NUMERICS["pivot_tol"])),
    })
    result.residuals.update({f"completion.{k}": v for k, v in completion.residuals.items()})
    return result


def case3_chern_lagrange_residual(a: AlgebroidSpec, L: LagrangeStructure, p: WPoint,
                                  completion: Optional[FrameCompletion] = None) -> float:
    """Transported Chern-Lagrange connection of (E, L) against the one of the frozen-frame L* on T'M."""
    completion = completion or case3_completion(a, L, p)
    transported = case3_induced_connection(a, L, chern_lagrange_field(L), p, completion).N
    X = completion.frame_inverse[:, :a.n]
    L_star = frozen_frame_lagrangian(a, L, p, X)
    direct = to_array(chern_lagrange_values(L_star, eta_point(a, p).env(), a.n, a.n))
    return float(np.max(np.abs(transported - direct)))


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def induction_case(a: AlgebroidSpec, p: WPoint) -> int:
    """1, 2 or 3 from the dimensions and the anchor rank at p."""
    r = anchor_rank(a, p)
    if a.n == a.m and r == a.n:
        return 1
    if r == a.m < a.n:
        return 2
    if r == a.n < a.m:
        return 3
    raise SingularAnchorError(f"Anchor of '{a.name}' has rank {r} with n={a.n}, m={a.m}", r)


def chern_lagrange_induction_suite(a: AlgebroidSpec, L: LagrangeStructure,
                                   points: Sequence[WPoint]) -> ResidualReport:
    """
    The Chern-Lagrange connection of (E, L) transported to T'M against the one computed on T'M directly.

    For a square invertible anchor the direct side is the Chern-Lagrange connection of
    L(z, rho^-1 eta); otherwise L* is built with the completion frozen at each point.
    """
    tracker = ResidualTracker()
    L.reality(points)
    for p in points:
        if a.n == a.m:
            R = _require_invertible_anchor(a, p)
            transported = case1_connection_transport(a, chern_lagrange_field(L), "E_to_TM", p)
            L_star = frozen_frame_lagrangian(a, L, p, np.linalg.inv(R))
            direct = to_array(chern_lagrange_values(L_star, eta_point(a, p).env(), a.n, a.n))
            tracker.record("induction.chern_lagrange", float(np.max(np.abs(transported - direct))), p)
        else:
            completion = case3_completion(a, L, p)
            tracker.record("induction.chern_lagrange", case3_chern_lagrange_residual(a, L, p, completion), p)
            for key, value in completion.residuals.items():
                tracker.record(f"completion.{key}", value, p)
    return tracker.report({}, "metric")


def completion_invariance_residual(a: AlgebroidSpec, L: LagrangeStructure, points: Sequence[WPoint]) -> float:
    """Induced connections recomputed from a completion seeded in reverse order without pivoting."""
    worst = 0.0
    for p in points:
        if a.m < a.n:
            N_TM = chern_lagrange_field(L)
            first = case2_induced_connection(a, L, N_TM, p, case2_completion(a, L, p)).N
            other = case2_completion(a, L, p, _default_seed_order(a.n, True), pivoting=False)
            second = case2_induced_connection(a, L, N_TM, p, other).N
        else:
            N_E = chern_lagrange_field(L)
            first_result = case3_induced_connection(a, L, N_E, p, case3_completion(a, L, p))
            other = case3_completion(a, L, p, _default_seed_order(a.m, True), pivoting=False)
            second_result = case3_induced_connection(a, L, N_E, p, other)
            first = np.concatenate([first_result.N.ravel(), first_result.extras["metric_TM"].ravel()])
            second = np.concatenate([second_result.N.ravel(), second_result.extras["metric_TM"].ravel()])
        worst = max(worst, float(np.max(np.abs(first - second))))
    return worst


def induction_report(a: AlgebroidSpec, L: LagrangeStructure, points: Sequence[WPoint],
                     case: Optional[int] = None) -> ResidualReport:
    """All residuals of the rank case of an algebroid, collected over a batch of points."""
    if not points:
        raise ValueError("Induction needs at least one sample point")
    case = case or induction_case(a, points[0])
    tracker = ResidualTracker()
    tol = {"metric.hermitian": "exact"}
    L.reality(points if L.domain == "onE" else [eta_point(a, p) for p in points])
    logger.info(f"Running case {case} induction on '{a.name}' at {len(points)} points")

    if case == 1:
        if L.domain == "onTM":
            N_TM = chern_lagrange_field(L)
            for p in points:
                pulled = case1_pullback(a, L, p)
                tracker.record("case1.metric_pullback", pulled.residuals["metric_pullback"], p)
                tracker.record("case1.metric_rank_deficit",
                               float(a.m - rank(pulled.metric, NUMERICS["pivot_tol"])), p)
                via_transport = case1_connection_transport(a, N_TM, "TM_to_E", p)
                tracker.record("case1.chern_lagrange", float(np.max(np.abs(via_transport - pulled.N))), p)
                tracker.record("metric.hermitian", hermitian_residual(pulled.metric), p)
            N_E = chern_lagrange_field(pullback_lagrangian(a, L))
        else:
            for p in points:
                _require_invertible_anchor(a, p)
                g_E = metric_from_lagrangian(L, p).matrix
                tracker.record("case1.metric_rank_deficit", float(a.m - rank(g_E, NUMERICS["pivot_tol"])), p)
                tracker.record("metric.hermitian", hermitian_residual(g_E), p)
            N_E = chern_lagrange_field(L)
            suite = chern_lagrange_induction_suite(a, L, points)
            for check in suite.checks:
                tracker.record(f"case1.{check.name.split('.', 1)[-1]}", check.max_residual)
        tracker.record("case1.round_trip", case1_round_trip_residual(a, N_E, points))
        tol.update({"case1.round_trip": "transport", "case1.metric_rank_deficit": 0.0})
    elif case == 2:
        if L.domain != "onTM":
            raise UnsupportedInputError("Case II induction starts from a Lagrangian on T'M")
        N_TM = chern_lagrange_field(L)
        for p in points:
            completion = case2_completion(a, L, p)
            induced = case2_induced_connection(a, L, N_TM, p, completion)
            tracker.record_many("case2.", induced.residuals, p)
            tracker.record("case2.chern_lagrange", chern_lagrange_coincidence_residual(a, L, p, completion), p)
            g_E = metric_from_lagrangian(pullback_lagrangian(a, L), p).matrix
            tracker.record("case2.metric_rank_deficit", float(a.m - rank(g_E, NUMERICS["pivot_tol"])), p)
            tracker.record("metric.hermitian", hermitian_residual(completion.gram), p)
        tracker.record("case2.completion_invariance", completion_invariance_residual(a, L, points))
        tol["case2.metric_rank_deficit"] = 0.0
    elif case == 3:
        if L.domain != "onE":
            raise UnsupportedInputError("Case III induction starts from a Lagrangian on E")
        report = chern_lagrange_induction_suite(a, L, points)
        N_E = chern_lagrange_field(L)
        for p in points:
            induced = case3_induced_connection(a, L, N_E, p)
            tracker.record_many("case3.", induced.residuals, p)
            tracker.record("metric.hermitian", hermitian_residual(metric_from_lagrangian(L, p).matrix), p)
        tracker.record("case3.completion_invariance", completion_invariance_residual(a, L, points))
        tol["case3.metric_rank_deficit"] = 0.0
        combined = tracker.report(tol, "metric")
        combined.merge(report)
        return combined
    else:
        raise UnsupportedInputError(f"Unknown induction case {case}")
    return tracker.report(tol, "metric")
