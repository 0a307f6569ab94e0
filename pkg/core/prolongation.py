"""
The prolongation of a holomorphic Lie algebroid over its vector bundle projection.

Sections W = Z^alpha Z_alpha + V^alpha V_alpha are pairs of coefficient
fields on E. Brackets follow the prolongation bracket and are cross-checked
through the anchor rho_T(W) = rho^k_alpha Z^alpha d/dz^k + V^alpha d/du^alpha
acting as derivations on polynomial test functions.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import TOLERANCES
from core.algebroid import AlgebroidSpec, ChartData, SectionExpr, bracket_field
from core.errors import DimensionMismatchError, SingularAnchorError
from core.linalg import inverse, rank, to_array
from core.report import ResidualReport, ResidualTracker
from core.spray import SprayField
from core.tangent_geometry import ConnectionField, TensorTable, adapted_vector
from core.vector_fields import VectorField, as_field, commutator_apply, total_test_functions
from core.wirtinger import Field, WPoint, partial

logger = logging.getLogger(__name__)


@dataclass
class ProlongVector:
    """Coefficients of a vector of the prolongation at a point."""
    Z: np.ndarray
    V: np.ndarray
    at: WPoint

    def __post_init__(self):
        self.Z = np.asarray(self.Z, dtype=complex)
        self.V = np.asarray(self.V, dtype=complex)
        if self.Z.shape != self.V.shape:
            raise DimensionMismatchError("Z and V parts of a prolongation vector must have equal length")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.Z, self.V])


@dataclass(frozen=True)
class ProlongSection:
    """A section Z^alpha(z, u) Z_alpha + V^alpha(z, u) V_alpha with field coefficients."""
    Z: Tuple[Field, ...]
    V: Tuple[Field, ...]

    @property
    def m(self) -> int:
        return len(self.Z)

    @classmethod
    def of(cls, Z: Sequence[Any], V: Sequence[Any]) -> "ProlongSection":
        return cls(tuple(as_field(c) for c in Z), tuple(as_field(c) for c in V))

    @classmethod
    def basis(cls, m: int, index: int, vertical: bool = False) -> "ProlongSection":
        """Z_index or V_index (0-based)."""
        unit = [1.0 if al == index else 0.0 for al in range(m)]
        zero = [0.0] * m
        return cls.of(zero, unit) if vertical else cls.of(unit, zero)

    def values(self, env: Mapping[str, Any]) -> Tuple[List[Any], List[Any]]:
        return [c(env) for c in self.Z], [c(env) for c in self.V]

    def at(self, p: WPoint) -> ProlongVector:
        Z, V = self.values(p.env())
        return ProlongVector([complex(x) for x in Z], [complex(x) for x in V], p)

    def __sub__(self, other: "ProlongSection") -> "ProlongSection":
        def diff(f, g):
            return lambda env: f(env) - g(env)
        return ProlongSection(tuple(diff(f, g) for f, g in zip(self.Z, other.Z)),
                              tuple(diff(f, g) for f, g in zip(self.V, other.V)))


@dataclass
class ProlongConnection:
    """N^beta_alpha(z, u), stored as N[beta][alpha]."""
    N: Tuple[Tuple[Field, ...], ...]
    m: int
    residuals: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.N) != self.m or any(len(row) != self.m for row in self.N):
            raise DimensionMismatchError(f"Prolongation connection must be {self.m} x {self.m}")

    @classmethod
    def from_connection(cls, connection: ConnectionField) -> "ProlongConnection":
        if connection.kind != "onProlongation":
            raise DimensionMismatchError(f"Expected a connection onProlongation, got {connection.kind}")
        return cls(connection.coeffs, connection.m)

    def values(self, env: Mapping[str, Any]) -> List[List[Any]]:
        return [[c(env) for c in row] for row in self.N]

    def at(self, p: WPoint) -> np.ndarray:
        return to_array(self.values(p.env()))

    def adapted_section(self, alpha: int) -> ProlongSection:
        """delta_alpha = Z_alpha - N^beta_alpha V_beta."""
        Z = [1.0 if al == alpha else 0.0 for al in range(self.m)]
        V = [(lambda env, c=self.N[be][alpha]: -c(env)) for be in range(self.m)]
        return ProlongSection.of(Z, V)


# ---------------------------------------------------------------------------
# Anchor, brackets, lifts
# ---------------------------------------------------------------------------

def prolong_anchor(a: AlgebroidSpec, W: ProlongSection) -> VectorField:
    """rho_T(W) = rho^k_alpha Z^alpha d/dz^k + V^alpha d/du^alpha."""
    if W.m != a.m:
        raise DimensionMismatchError(f"Section rank {W.m} does not match algebroid rank {a.m}")
    components: Dict[str, Any] = {}
    for k in range(a.n):
        components[f"z{k + 1}"] = lambda env, k=k: sum(
            (a.rho[al][k](env) * W.Z[al](env) for al in range(a.m)), 0j)
    for al in range(a.m):
        components[f"u{al + 1}"] = W.V[al]
    return VectorField(components)


def prolong_bracket(a: AlgebroidSpec, W1: ProlongSection, W2: ProlongSection) -> ProlongSection:
    """
    [W1, W2] = (Z1^a Z2^b C^g_ab + rho_T(W1) Z2^g - rho_T(W2) Z1^g) Z_g
               + (rho_T(W1) V2^g - rho_T(W2) V1^g) V_g
    """
    X1, X2 = prolong_anchor(a, W1), prolong_anchor(a, W2)
    m = a.m

    def z_part(g):
        def value(env):
            Z1 = [c(env) for c in W1.Z]
            Z2 = [c(env) for c in W2.Z]
            total = sum((Z1[al] * Z2[be] * a.C[g][al][be](env) for al in range(m) for be in range(m)), 0j)
            return total + X1.apply(W2.Z[g], env) - X2.apply(W1.Z[g], env)
        return value

    def v_part(g):
        return lambda env: X1.apply(W2.V[g], env) - X2.apply(W1.V[g], env)

    return ProlongSection(tuple(z_part(g) for g in range(m)), tuple(v_part(g) for g in range(m)))


def vertical_lift_section(s: SectionExpr) -> ProlongSection:
    return ProlongSection.of([0.0] * s.m, s.components)


def complete_lift_section(a: AlgebroidSpec, s: SectionExpr) -> ProlongSection:
    """Z^alpha = s^alpha, V^alpha = (rho^k_beta ds^alpha/dz^k - s^gamma C^alpha_{gamma beta}) u^beta."""
    m, n = a.m, a.n

    def v_part(al):
        def value(env):
            rho = a.rho_values(env)
            s_values = s.values(env)
            grads = [partial(s.components[al], env, f"z{k + 1}") for k in range(n)]
            total = 0j
            for be in range(m):
                coefficient = sum((rho[be][k] * grads[k] for k in range(n)), 0j)
                coefficient = coefficient - sum((s_values[g] * a.C[al][g][be](env) for g in range(m)), 0j)
                total = total + coefficient * env[f"u{be + 1}"]
            return total
        return value

    return ProlongSection(tuple(s.components), tuple(v_part(al) for al in range(m)))


def vertical_lift(s: SectionExpr, p: WPoint) -> ProlongVector:
    """Z = 0, V^alpha = s^alpha(z)."""
    return vertical_lift_section(s).at(p)


def complete_lift(a: AlgebroidSpec, s: SectionExpr, p: WPoint) -> ProlongVector:
    if s.m != a.m:
        raise DimensionMismatchError(f"Section has {s.m} components, algebroid rank is {a.m}")
    return complete_lift_section(a, s).at(p)


def _section_gap(left: ProlongSection, right: ProlongSection, env: Mapping[str, Any]) -> float:
    Zl, Vl = left.values(env)
    Zr, Vr = right.values(env)
    return max(abs(complex(x) - complex(y)) for x, y in zip(Zl + Vl, Zr + Vr))


def _derivation_gap(a: AlgebroidSpec, W1: ProlongSection, W2: ProlongSection,
                    expected: ProlongSection, env: Mapping[str, Any]) -> float:
    """max over test functions of |[rho_T W1, rho_T W2] f - rho_T(expected) f|."""
    X1, X2, Xe = prolong_anchor(a, W1), prolong_anchor(a, W2), prolong_anchor(a, expected)
    worst = 0.0
    for f in total_test_functions(a.n, a.m):
        worst = max(worst, abs(complex(commutator_apply(X1, X2, f, env)) - complex(Xe.apply(f, env))))
    return worst


def _zero_section(m: int) -> ProlongSection:
    return ProlongSection.of([0.0] * m, [0.0] * m)


def lift_bracket_residuals(a: AlgebroidSpec, s1: SectionExpr, s2: SectionExpr,
                           points: Sequence[WPoint]) -> ResidualReport:
    """
    Residuals of [s1^V, s2^V] = 0, [s1^V, s2^C] = [s1, s2]^V and [s1^C, s2^C] = [s1, s2]^C.
    """
    v1, v2 = vertical_lift_section(s1), vertical_lift_section(s2)
    c1, c2 = complete_lift_section(a, s1), complete_lift_section(a, s2)
    bracket = bracket_field(a, s1, s2)
    cases = {
        "vertical_vertical": (v1, v2, _zero_section(a.m)),
        "vertical_complete": (v1, c2, vertical_lift_section(bracket)),
        "complete_complete": (c1, c2, complete_lift_section(a, bracket)),
    }
    tracker = ResidualTracker()
    for p in points:
        env = p.env()
        for name, (left, right, expected) in cases.items():
            tracker.record(f"lift.{name}", _derivation_gap(a, left, right, expected, env), p)
            tracker.record(f"lift.{name}.components", _section_gap(prolong_bracket(a, left, right), expected, env), p)
    return tracker.report({}, "exact_ad")


def basis_bracket_residuals(a: AlgebroidSpec, points: Sequence[WPoint]) -> ResidualReport:
    """[Z_a, Z_b] = C^g_ab Z_g, [Z_a, V_b] = 0, [V_a, V_b] = 0 through rho_T commutators."""
    m = a.m
    tracker = ResidualTracker()
    Zs = [ProlongSection.basis(m, al) for al in range(m)]
    Vs = [ProlongSection.basis(m, al, vertical=True) for al in range(m)]
    for p in points:
        env = p.env()
        zz = zv = vv = 0.0
        for al in range(m):
            for be in range(m):
                structure = ProlongSection(
                    tuple((lambda e, g=g: a.C[g][al][be](e)) for g in range(m)),
                    tuple(as_field(0.0) for _ in range(m)))
                zz = max(zz, _derivation_gap(a, Zs[al], Zs[be], structure, env),
                         _section_gap(prolong_bracket(a, Zs[al], Zs[be]), structure, env))
                zv = max(zv, _derivation_gap(a, Zs[al], Vs[be], _zero_section(m), env))
                vv = max(vv, _derivation_gap(a, Vs[al], Vs[be], _zero_section(m), env))
        tracker.record("basis.zz", zz, p)
        tracker.record("basis.zv", zv, p)
        tracker.record("basis.vv", vv, p)
    exact = "exact"
    return tracker.report({"basis.zv": exact, "basis.vv": exact}, "exact_ad")


# ---------------------------------------------------------------------------
# Tangent structure, Liouville section, semisprays
# ---------------------------------------------------------------------------

def tangent_structure_apply(w: ProlongVector) -> ProlongVector:
    """T(Z_alpha) = V_alpha, T(V_alpha) = 0."""
    return ProlongVector(np.zeros_like(w.Z), w.Z.copy(), w.at)


def tangent_structure_section(W: ProlongSection) -> ProlongSection:
    return ProlongSection(tuple(as_field(0.0) for _ in W.Z), W.Z)


def liouville_section(m: int) -> ProlongSection:
    """L = u^alpha V_alpha."""
    return ProlongSection.of([0.0] * m, [(lambda env, al=al: env[f"u{al + 1}"]) for al in range(m)])


def semispray_section(S: SprayField, p: WPoint) -> ProlongVector:
    """u^alpha Z_alpha - 2 G^alpha V_alpha at p."""
    return ProlongVector(np.array(p.u, dtype=complex), -2 * S.at(p), p)


def liouville_tangent_bracket_residual(a: AlgebroidSpec, p: WPoint) -> float:
    """max over basis X of |[L, T X] - T[L, X] + T X|."""
    m = a.m
    env = p.env()
    L = liouville_section(m)
    worst = 0.0
    for al in range(m):
        for X in (ProlongSection.basis(m, al), ProlongSection.basis(m, al, vertical=True)):
            TX = tangent_structure_section(X)
            lhs = prolong_bracket(a, L, TX) - tangent_structure_section(prolong_bracket(a, L, X))
            Zl, Vl = lhs.values(env)
            Zt, Vt = TX.values(env)
            worst = max(worst, max(abs(complex(x) + complex(y)) for x, y in zip(Zl + Vl, Zt + Vt)))
    return worst


def tangent_structure_image_residual(vectors: Sequence[ProlongVector]) -> float:
    """T(T(w)) for each w; Im T lies in ker T exactly."""
    worst = 0.0
    for w in vectors:
        worst = max(worst, float(np.max(np.abs(tangent_structure_apply(tangent_structure_apply(w)).as_array()))))
    return worst


# ---------------------------------------------------------------------------
# Nonlinear connections on the prolongation
# ---------------------------------------------------------------------------

def nlc_from_base(a: AlgebroidSpec, N: ConnectionField,
                  points: Sequence[WPoint] = ()) -> ProlongConnection:
    """
    N^beta_alpha = rho^k_alpha N^beta_k.

    When points are given, rho_T(delta_alpha) = rho^k_alpha delta/delta z^k is
    checked on test functions and stored as the residual "anchor_adapted".
    """
    if N.kind != "onTE" or (N.n, N.m) != (a.n, a.m):
        raise DimensionMismatchError("Expected a connection onTE matching the algebroid")
    m, n = a.m, a.n

    def entry(be, al):
        return lambda env: sum((a.rho[al][k](env) * N[be, k](env) for k in range(n)), 0j)

    induced = ProlongConnection(tuple(tuple(entry(be, al) for al in range(m)) for be in range(m)), m)
    if points:
        worst = 0.0
        for p in points:
            env = p.env()
            for al in range(m):
                lhs = prolong_anchor(a, induced.adapted_section(al))
                for f in total_test_functions(n, m):
                    rhs = sum((a.rho[al][k](env) * adapted_vector(N, k).apply(f, env) for k in range(n)), 0j)
                    worst = max(worst, abs(complex(lhs.apply(f, env)) - complex(rhs)))
        induced.residuals["anchor_adapted"] = worst
        if worst > TOLERANCES["transport"]:
            logger.warning(f"Induced connection anchor identity residual {worst:.3e}")
    return induced


def spray_connection_field(a: AlgebroidSpec, S: SprayField, chart: Optional[ChartData] = None) -> ProlongConnection:
    """
    N^beta_alpha = dG^beta/du^alpha + P^beta_alpha with
    P^beta_alpha = 1/4 W^beta_gamma (rho^k_alpha dM^gamma_delta/dz^k u^delta - dM^gamma_alpha/dz^k rho^k_delta u^delta).
    """
    m, n = a.m, a.n

    def entry(be, al):
        def value(env):
            result = partial(S.G[be], env, f"u{al + 1}")
            if chart is not None:
                W = chart.W_values(env)
                dM = chart.dM(env)
                rho = a.rho_values(env)
                u = [env[f"u{d + 1}"] for d in range(m)]
                flow = [sum((rho[d][k] * u[d] for d in range(m)), 0j) for k in range(n)]
                correction = 0j
                for g in range(m):
                    for k in range(n):
                        inner = rho[al][k] * sum((dM[k][g][d] * u[d] for d in range(m)), 0j) - dM[k][g][al] * flow[k]
                        correction = correction + W[be][g] * inner
                result = result + 0.25 * correction
            return result
        return value

    return ProlongConnection(tuple(tuple(entry(be, al) for al in range(m)) for be in range(m)), m)


def nlc_from_spray(a: AlgebroidSpec, S: SprayField, chart: Optional[ChartData], p: WPoint) -> np.ndarray:
    """Values N[beta][alpha] of the connection induced by a spray at p."""
    return spray_connection_field(a, S, chart).at(p)


def prolong_nlc_change_residual(Np: ProlongConnection, Np_target: ProlongConnection, a: AlgebroidSpec,
                                chart: ChartData, points: Sequence[WPoint]) -> ResidualReport:
    """Residual of M^beta_alpha N~^gamma_beta - M^gamma_beta N^beta_alpha + rho^k_alpha dM^gamma_beta/dz^k u^beta."""
    tracker = ResidualTracker()
    for p in points:
        env = p.env()
        M = to_array(chart.M_values(env))
        dM = chart.dM(env)
        u = np.array(p.u, dtype=complex)
        R = a.anchor_matrix(p)                        # n x m
        drift = np.column_stack([sum(R[k, al] * (to_array(dM[k]) @ u) for k in range(a.n))
                                 for al in range(a.m)])
        residual = Np_target.at(chart.map_point(p)) @ M - M @ Np.at(p) + drift
        tracker.record("prolong_nlc.change_law", float(np.max(np.abs(residual))), p)
    return tracker.report({}, "metric")


def base_connection_from_prolongation(a: AlgebroidSpec, Np: ProlongConnection) -> ConnectionField:
    """N^beta_k = N^beta_alpha (rho^-1)^alpha_k for an invertible anchor."""
    if a.n != a.m:
        raise SingularAnchorError(f"Anchor of '{a.name}' is not square (n={a.n}, m={a.m})", min(a.n, a.m))
    n = a.n

    def entry(be, k):
        def value(env):
            rho = a.rho_values(env)                    # rho[al][k]
            try:
                rho_inv = inverse([[rho[al][h] for al in range(n)] for h in range(n)])  # [al][h] of (rho^k_al)^-1
            except ArithmeticError:
                raise SingularAnchorError("Anchor is not invertible at the evaluation point",
                                          rank(to_array(rho), 1e-10))
            return sum((Np.N[be][al](env) * rho_inv[al][k] for al in range(n)), 0j)
        return value

    coeffs = tuple(tuple(entry(be, k) for k in range(n)) for be in range(a.m))
    return ConnectionField("onTE", coeffs, n, a.m)


def prolong_curvature(a: AlgebroidSpec, Np: ProlongConnection, p: WPoint) -> TensorTable:
    """
    R^gamma_{alpha beta} = C^eps_ab N^g_eps + rho^k_b dN^g_a/dz^k - rho^k_a dN^g_b/dz^k
                           - N^eps_b dN^g_a/du^eps + N^eps_a dN^g_b/du^eps,
    plus the block dN^gamma_alpha/du^beta of [delta_alpha, V_beta] = (dN^gamma_alpha/du^beta) V_gamma.
    """
    env = p.env()
    m, n = a.m, a.n
    N = Np.at(p)                                                            # N[g][a]
    C = np.array(a.C_values(env), dtype=complex).reshape(m, m, m)
    rho = a.anchor_matrix(p)                                                # rho[k][a]
    dz = np.array([[[complex(partial(Np.N[g][al], env, f"z{k + 1}")) for k in range(n)] for al in range(m)]
                   for g in range(m)])                                      # dz[g,a,k]
    du = np.array([[[complex(partial(Np.N[g][al], env, f"u{e + 1}")) for e in range(m)] for al in range(m)]
                   for g in range(m)])                                      # du[g,a,e]
    anchored = np.einsum("gak,kb->gab", dz, rho)                            # rho^k_b dN^g_a/dz^k
    vertical = np.einsum("gae,eb->gab", du, N)                              # N^e_b dN^g_a/du^e
    R = (np.einsum("eab,ge->gab", C, N)
         + anchored - np.transpose(anchored, (0, 2, 1))
         - vertical + np.transpose(vertical, (0, 2, 1)))
    table = TensorTable("prolongation_curvature")
    table.add("R", R, "^gamma_{alpha beta}", (1, 2))
    table.add("delta_vertical", du, "^gamma_{alpha beta}")
    table.notes["delta_vertical"] = "[delta_alpha, V_beta] = (dN^gamma_alpha/du^beta) V_gamma"
    table.residuals["antisymmetry"] = table.antisymmetry_residual()
    return table


def adapted_frame_bracket_residual(a: AlgebroidSpec, Np: ProlongConnection,
                                   points: Sequence[WPoint]) -> ResidualReport:
    """[delta_a, delta_b] against C^g_ab delta_g + R^g_ab V_g, and [delta_a, V_b] against dN^g_a/du^b V_g."""
    m = a.m
    tracker = ResidualTracker()
    deltas = [Np.adapted_section(al) for al in range(m)]
    for p in points:
        env = p.env()
        curvature = prolong_curvature(a, Np, p)
        R, du = curvature["R"], curvature["delta_vertical"]
        N = Np.at(p)
        worst_hh = worst_hv = 0.0
        for al in range(m):
            for be in range(m):
                Zb, Vb = prolong_bracket(a, deltas[al], deltas[be]).values(env)
                Cab = np.array([complex(a.C[g][al][be](env)) for g in range(m)])
                expected_V = -N @ Cab + R[:, al, be]
                gap = np.concatenate([np.array(Zb, dtype=complex) - Cab, np.array(Vb, dtype=complex) - expected_V])
                worst_hh = max(worst_hh, float(np.max(np.abs(gap))))
                Zv, Vv = prolong_bracket(a, deltas[al], ProlongSection.basis(m, be, vertical=True)).values(env)
                gap = np.concatenate([np.array(Zv, dtype=complex), np.array(Vv, dtype=complex) - du[:, al, be]])
                worst_hv = max(worst_hv, float(np.max(np.abs(gap))))
        tracker.record("adapted.delta_delta", worst_hh, p)
        tracker.record("adapted.delta_vertical", worst_hv, p)
    return tracker.report({}, "exact_ad")


def prolong_differential_check(a: AlgebroidSpec, points: Sequence[WPoint]) -> ResidualReport:
    """
    d_T^2 on the coordinate functions.

    d_T z^k = rho^k_alpha Z^alpha and d_T Z^alpha = -1/2 C^alpha_{beta gamma} Z^beta ^ Z^gamma, so the
    coefficient of Z^alpha ^ Z^beta in d_T^2 z^k is
    rho^j_alpha d_j rho^k_beta - rho^j_beta d_j rho^k_alpha - rho^k_gamma C^gamma_{alpha beta}.
    d_T u^alpha = V^alpha is closed.
    """
    n, m = a.n, a.m
    tracker = ResidualTracker()
    for p in points:
        env = p.env()
        rho = a.rho_values(env)
        C = a.C_values(env)
        d_rho = [[[partial(a.rho[al][k], env, f"z{j + 1}") for j in range(n)] for k in range(n)] for al in range(m)]
        worst = 0.0
        for al in range(m):
            for be in range(al + 1, m):
                for k in range(n):
                    coefficient = sum((rho[al][j] * d_rho[be][k][j] - rho[be][j] * d_rho[al][k][j]
                                       for j in range(n)), 0j)
                    coefficient -= sum((rho[g][k] * C[g][al][be] for g in range(m)), 0j)
                    worst = max(worst, abs(complex(coefficient)))
        tracker.record("differential.z", worst, p)
        tracker.record("differential.u", 0.0, p)
    return tracker.report({}, "exact_ad")
