"""
Geometry of T'E: induced coordinates, the tangent anchor, nonlinear
connections with their adapted frames, and torsion/curvature tables of a
distinguished linear connection.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import TOLERANCES
from core.algebroid import AlgebroidSpec, ChartData
from core.errors import ConfigError, DimensionMismatchError
from core.expression import Expression, VariableContext, parse
from core.linalg import to_array
from core.report import ResidualReport, ResidualTracker
from core.vector_fields import VectorField, commutator_apply, total_test_functions
from core.wirtinger import Field, WPoint, partial

logger = logging.getLogger(__name__)

CONNECTION_KINDS = {
    "onTE": ("m", "n"),            # N^alpha_k
    "onProlongation": ("m", "m"),  # N^beta_alpha, stored as [beta][alpha]
    "onTM": ("n", "n"),            # N^h_k
}


# ---------------------------------------------------------------------------
# Coefficient containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConnectionField:
    """Coefficients of a complex nonlinear connection; entries are Expressions or derived evaluators."""
    kind: str
    coeffs: Tuple[Tuple[Field, ...], ...]
    n: int
    m: int

    def __post_init__(self):
        if self.kind not in CONNECTION_KINDS:
            raise ValueError(f"Unknown connection kind '{self.kind}'")
        sizes = {"n": self.n, "m": self.m}
        rows, cols = (sizes[s] for s in CONNECTION_KINDS[self.kind])
        if len(self.coeffs) != rows or any(len(row) != cols for row in self.coeffs):
            raise DimensionMismatchError(f"{self.kind} connection must be a {rows} x {cols} grid")

    @classmethod
    def from_texts(cls, kind: str, texts: Sequence[Sequence[str]], n: int, m: int) -> "ConnectionField":
        ctx = VariableContext.total(n, n if kind == "onTM" else m)
        grid = tuple(tuple(parse(t, ctx) for t in row) for row in texts)
        return cls(kind, grid, n, m)

    @classmethod
    def zero(cls, kind: str, n: int, m: int) -> "ConnectionField":
        sizes = {"n": n, "m": m}
        rows, cols = (sizes[s] for s in CONNECTION_KINDS[kind])
        ctx = VariableContext.total(n, m)
        zero = Expression.constant(0.0, ctx)
        return cls(kind, tuple(tuple(zero for _ in range(cols)) for _ in range(rows)), n, m)

    def __getitem__(self, index: Tuple[int, int]) -> Field:
        row, col = index
        return self.coeffs[row][col]

    def values(self, env: Mapping[str, Any]) -> List[List[Any]]:
        return [[c(env) for c in row] for row in self.coeffs]

    def value_array(self, p: WPoint) -> np.ndarray:
        return to_array(self.values(p.env()))

    @property
    def is_symbolic(self) -> bool:
        return all(isinstance(c, Expression) for row in self.coeffs for c in row)


def _grid(dims: Tuple[int, ...], fill):
    if len(dims) == 1:
        return [fill for _ in range(dims[0])]
    return [_grid(dims[1:], fill) for _ in range(dims[0])]


def _freeze(grid):
    return tuple(_freeze(g) for g in grid) if isinstance(grid, list) else grid


@dataclass(frozen=True)
class LinearConnectionCoeffs:
    """
    Coefficients of a distinguished linear connection D on T'E.

    L_ijk[i][j][k] = L^i_{jk}, L_ijg[i][j][g] = L^i_{j gamma},
    L_abk[a][b][k] = L^alpha_{beta k}, C_abg[a][b][g] = C^alpha_{beta gamma}.
    """
    n: int
    m: int
    L_ijk: tuple
    L_ijg: tuple
    L_abk: tuple
    C_abg: tuple

    BLOCKS = ("L_ijk", "L_ijg", "L_abk", "C_abg")

    @staticmethod
    def block_shape(name: str, n: int, m: int) -> Tuple[int, int, int]:
        return {"L_ijk": (n, n, n), "L_ijg": (n, n, m), "L_abk": (m, m, n), "C_abg": (m, m, m)}[name]

    @classmethod
    def zero(cls, n: int, m: int) -> "LinearConnectionCoeffs":
        return cls.from_json({}, n, m)

    @classmethod
    def from_json(cls, block: Mapping[str, Any], n: int, m: int) -> "LinearConnectionCoeffs":
        """
        Read {"L_ijk": [{"i":1,"j":1,"k":2,"expr":"..."}], ...}; omitted entries are zero.

        Indices are 1-based and read positionally as (i, j, k) in every block.
        """
        ctx = VariableContext.total(n, m)
        zero = Expression.constant(0.0, ctx)
        unknown = set(block) - set(cls.BLOCKS)
        if unknown:
            raise ConfigError(f"Unknown linear connection blocks: {sorted(unknown)}")
        built = {}
        for name in cls.BLOCKS:
            shape = cls.block_shape(name, n, m)
            grid = _grid(shape, zero)
            for entry in block.get(name, []):
                try:
                    index = [int(entry[key]) - 1 for key in ("i", "j", "k")]
                    text = entry["expr"]
                except (KeyError, TypeError, ValueError) as e:
                    raise ConfigError(f"Malformed {name} entry {entry!r}: {e}")
                if any(not 0 <= ix < size for ix, size in zip(index, shape)):
                    raise ConfigError(f"{name} entry {entry!r} out of range for shape {shape}")
                grid[index[0]][index[1]][index[2]] = parse(text, ctx)
            built[name] = _freeze(grid)
        return cls(n, m, **built)

    def values(self, name: str, env: Mapping[str, Any]) -> np.ndarray:
        block = getattr(self, name)
        return np.array([[[complex(c(env)) for c in row] for row in plane] for plane in block], dtype=complex)

    def derivative(self, name: str, env: Mapping[str, Any], var: str) -> np.ndarray:
        block = getattr(self, name)
        return np.array([[[complex(partial(c, env, var)) for c in row] for row in plane] for plane in block],
                        dtype=complex)


@dataclass
class TensorTable:
    """Labeled coefficient blocks at a point."""
    name: str
    blocks: Dict[str, np.ndarray] = field(default_factory=dict)
    labels: Dict[str, str] = field(default_factory=dict)
    antisymmetric: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    residuals: Dict[str, float] = field(default_factory=dict)
    notes: Dict[str, str] = field(default_factory=dict)

    def add(self, key: str, values: np.ndarray, label: str, antisymmetric_in: Optional[Tuple[int, int]] = None):
        self.blocks[key] = np.asarray(values, dtype=complex)
        self.labels[key] = label
        if antisymmetric_in is not None:
            self.antisymmetric[key] = antisymmetric_in

    def __getitem__(self, key: str) -> np.ndarray:
        return self.blocks[key]

    def __contains__(self, key: str) -> bool:
        return key in self.blocks

    def antisymmetry_residual(self) -> float:
        worst = 0.0
        for key, (i, j) in self.antisymmetric.items():
            block = self.blocks[key]
            if block.size:
                worst = max(worst, float(np.max(np.abs(block + np.swapaxes(block, i, j)))))
        return worst

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "blocks": {key: {"label": self.labels[key],
                             "real": value.real.tolist(), "imag": value.imag.tolist()}
                       for key, value in sorted(self.blocks.items())},
            "residuals": dict(sorted(self.residuals.items())),
            "notes": dict(self.notes),
        }


# ---------------------------------------------------------------------------
# Induced coordinates and the tangent anchor
# ---------------------------------------------------------------------------

def induced_eta(a: AlgebroidSpec, p: WPoint) -> np.ndarray:
    """eta^k = u^alpha rho^k_alpha(z)."""
    if p.m != a.m:
        raise DimensionMismatchError(f"Point has fiber rank {p.m}, algebroid rank is {a.m}")
    return a.anchor_matrix(p) @ np.array(p.u, dtype=complex)


def anchor_jacobian(a: AlgebroidSpec, p: WPoint) -> np.ndarray:
    """Matrix of rho_*: T'E -> T'T'M in coordinates (z, u) -> (z, eta), shape 2n x (n+m)."""
    env = p.env()
    n, m = a.n, a.m
    u = np.array(p.u, dtype=complex)
    J = np.zeros((2 * n, n + m), dtype=complex)
    J[:n, :n] = np.eye(n)
    for h in range(n):
        for k in range(n):
            J[n + h, k] = sum(u[al] * complex(partial(a.rho[al][h], env, f"z{k + 1}")) for al in range(m))
    J[n:, n:] = a.anchor_matrix(p)
    return J


def tangent_pushforward(a: AlgebroidSpec, p: WPoint, Z: Sequence[complex],
                        V: Sequence[complex]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Push (Z^k d/dz^k + V^alpha d/du^alpha) forward to T'T'M.

    Returns:
        (Z, V_eta) with V_eta^h = Z^k u^alpha drho^h_alpha/dz^k + V^alpha rho^h_alpha
    """
    Z = np.asarray(Z, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if Z.shape != (a.n,) or V.shape != (a.m,):
        raise DimensionMismatchError("Tangent vector components do not match (n, m)")
    image = anchor_jacobian(a, p) @ np.concatenate([Z, V])
    return image[:a.n], image[a.n:]


def cotangent_pullback(a: AlgebroidSpec, p: WPoint, covector: Sequence[complex]) -> np.ndarray:
    """Pull a covector (dz-part, deta-part) on T'M back to E along rho."""
    omega = np.asarray(covector, dtype=complex)
    if omega.shape != (2 * a.n,):
        raise DimensionMismatchError(f"Covector on T'M must have {2 * a.n} components")
    return anchor_jacobian(a, p).T @ omega


def complex_structure_residual(a: AlgebroidSpec, points: Sequence[WPoint], seed: int = 0) -> float:
    """max |rho_*(i v) - i rho_*(v)| over random tangent vectors."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in points:
        Z = rng.normal(size=a.n) + 1j * rng.normal(size=a.n)
        V = rng.normal(size=a.m) + 1j * rng.normal(size=a.m)
        left = np.concatenate(tangent_pushforward(a, p, 1j * Z, 1j * V))
        right = 1j * np.concatenate(tangent_pushforward(a, p, Z, V))
        worst = max(worst, float(np.max(np.abs(left - right))))
    return worst


def induced_eta_change_residual(a: AlgebroidSpec, chart: ChartData, points: Sequence[WPoint]) -> float:
    """eta computed in the target chart against u^g rho^h_g dz~^k/dz^h."""
    target = a.transport(chart)
    worst = 0.0
    for p in points:
        J = chart.check_jacobian(p.env())
        expected = J @ induced_eta(a, p)
        actual = induced_eta(target, chart.map_point(p))
        worst = max(worst, float(np.max(np.abs(expected - actual))))
    return worst


# ---------------------------------------------------------------------------
# Nonlinear connections on T'E
# ---------------------------------------------------------------------------

def _require_kind(N: ConnectionField, kind: str):
    if N.kind != kind:
        raise DimensionMismatchError(f"Expected a connection {kind}, got {N.kind}")


def adapted_vector(N: ConnectionField, k: int) -> VectorField:
    """delta/delta z^k = d/dz^k - N^alpha_k d/du^alpha (k is 0-based)."""
    components: Dict[str, Any] = {f"z{k + 1}": 1.0}
    for al in range(N.m):
        coefficient = N[al, k]
        components[f"u{al + 1}"] = lambda env, c=coefficient: -c(env)
    return VectorField(components)


def vertical_vector(beta: int) -> VectorField:
    return VectorField({f"u{beta + 1}": 1.0})


def adapted_frame_apply(N: ConnectionField, f: Field, p: WPoint) -> np.ndarray:
    """(df/dz^k - N^alpha_k df/du^alpha)_k."""
    _require_kind(N, "onTE")
    env = p.env()
    return np.array([complex(adapted_vector(N, k).apply(f, env)) for k in range(N.n)])


def nlc_change_residual(N: ConnectionField, chart: ChartData, points: Sequence[WPoint],
                        N_target: Optional[ConnectionField] = None) -> ResidualReport:
    """
    Residual of the transformation law dz~^k/dz^h N~^alpha_k = M^alpha_beta N^beta_h - dM^alpha_beta/dz^h u^beta.

    Args:
        N: connection in the working chart
        chart: transition to the target chart
        points: sample points in the working chart
        N_target: connection in the target chart; defaults to the same coefficient functions
    """
    _require_kind(N, "onTE")
    target = N_target or N
    _require_kind(target, "onTE")
    tracker = ResidualTracker()
    for p in points:
        env = p.env()
        J = chart.check_jacobian(env)
        M = to_array(chart.M_values(env))
        dM = chart.dM(env)
        u = np.array(p.u, dtype=complex)
        N_here = N.value_array(p)                       # m x n
        N_there = target.value_array(chart.map_point(p))
        lhs = N_there @ J                               # [alpha][h] = N~^alpha_k J[k][h]
        rhs = M @ N_here - np.column_stack([to_array(dM[h]) @ u for h in range(N.n)])
        tracker.record("nlc.change_law", float(np.max(np.abs(lhs - rhs))), p)
    report = tracker.report({}, "metric")
    report.environment["chart"] = chart.name
    return report


def adapted_bracket_coeffs(N: ConnectionField, p: WPoint) -> TensorTable:
    """
    Bracket coefficients of the adapted frame {delta_k, d/du^alpha} at p.

    Blocks:
        dN[alpha, k, h]         dN^alpha_k/dz^h - dN^alpha_h/dz^k
        commutator[alpha, k, h] delta_h N^alpha_k - delta_k N^alpha_h (exact, with u-derivative terms)
        vertical[alpha, k, beta] dN^alpha_k/du^beta = coefficient of [delta_k, d/du^beta]
    Residuals compare derivation brackets on the test family with these coefficients.
    """
    _require_kind(N, "onTE")
    env = p.env()
    n, m = N.n, N.m
    values = N.values(env)
    dz = np.array([[[complex(partial(N[al, k], env, f"z{h + 1}")) for h in range(n)] for k in range(n)]
                   for al in range(m)])                              # dz[al,k,h] = d_h N^al_k
    du = np.array([[[complex(partial(N[al, k], env, f"u{b + 1}")) for b in range(m)] for k in range(n)]
                   for al in range(m)])                              # du[al,k,b] = d_b N^al_k
    Nv = to_array(values)
    table = dz - np.transpose(dz, (0, 2, 1))
    # delta_h N^al_k = d_h N^al_k - N^b_h d_b N^al_k
    delta = dz - np.einsum("bh,akb->akh", Nv, du)
    commutator = delta - np.transpose(delta, (0, 2, 1))

    result = TensorTable("adapted_brackets")
    result.add("dN", table, "^alpha_{k h}", (1, 2))
    result.add("commutator", commutator, "^alpha_{k h}", (1, 2))
    result.add("vertical", du, "^alpha_{k beta}")

    functions = total_test_functions(n, m)
    exact, against_table, mixed, vertical_pairs = 0.0, 0.0, 0.0, 0.0
    for f in functions:
        grad_u = [complex(partial(f, env, f"u{al + 1}")) for al in range(m)]
        for k in range(n):
            for h in range(n):
                bracket = complex(commutator_apply(adapted_vector(N, k), adapted_vector(N, h), f, env))
                exact = max(exact, abs(bracket - sum(commutator[al, k, h] * grad_u[al] for al in range(m))))
                against_table = max(against_table, abs(bracket - sum(table[al, k, h] * grad_u[al] for al in range(m))))
            for b in range(m):
                bracket = complex(commutator_apply(adapted_vector(N, k), vertical_vector(b), f, env))
                mixed = max(mixed, abs(bracket))
        for al in range(m):
            for b in range(m):
                vertical_pairs = max(vertical_pairs, abs(complex(
                    commutator_apply(vertical_vector(al), vertical_vector(b), f, env))))
    result.residuals.update({
        "bracket_exact": exact,
        "bracket_table": against_table,
        "horizontal_vertical": mixed,
        "vertical_vertical": vertical_pairs,
    })
    if against_table > TOLERANCES["exact_ad"] or mixed > TOLERANCES["exact_ad"]:
        result.notes["fiber_dependence"] = "N depends on u; the z-derivative table omits the vertical terms"
    return result


# ---------------------------------------------------------------------------
# Torsion and curvature of a distinguished linear connection
# ---------------------------------------------------------------------------

def _connection_z_derivatives(N: ConnectionField, env: Mapping[str, Any]) -> np.ndarray:
    """dN[al, k, h] = dN^al_k/dz^h."""
    return np.array([[[complex(partial(N[al, k], env, f"z{h + 1}")) for h in range(N.n)] for k in range(N.n)]
                     for al in range(N.m)], dtype=complex).reshape(N.m, N.n, N.n)


def torsion_table(D: LinearConnectionCoeffs, N: ConnectionField, p: WPoint) -> TensorTable:
    """
    Torsion coefficients of D in the adapted frame of N.

    T^i_{hk} = L^i_{kh} - L^i_{hk}, T^alpha_{hk} = d_k N^alpha_h - d_h N^alpha_k,
    T^i_{h alpha} = -L^i_{h alpha}, T^beta_{h alpha} = L^beta_{alpha h},
    T^gamma_{alpha beta} = C^gamma_{alpha beta} - C^gamma_{beta alpha}.
    """
    _require_kind(N, "onTE")
    if (D.n, D.m) != (N.n, N.m):
        raise DimensionMismatchError("Linear and nonlinear connection dimensions differ")
    env = p.env()
    L = D.values("L_ijk", env)
    Lg = D.values("L_ijg", env)
    Lk = D.values("L_abk", env)
    C = D.values("C_abg", env)
    dN = _connection_z_derivatives(N, env)

    table = TensorTable("torsion")
    table.add("T_ihk", np.transpose(L, (0, 2, 1)) - L, "^i_{h k}", (1, 2))
    table.add("T_ahk", dN - np.transpose(dN, (0, 2, 1)), "^alpha_{h k}", (1, 2))
    table.add("T_iha", -Lg, "^i_{h alpha}")
    table.add("T_bha", np.transpose(Lk, (0, 2, 1)), "^beta_{h alpha}")
    table.add("T_gab", C - np.transpose(C, (0, 2, 1)), "^gamma_{alpha beta}", (1, 2))
    table.notes["T_gab"] = "vertical torsion read as C^gamma_{alpha beta} - C^gamma_{beta alpha}"
    table.residuals["antisymmetry"] = table.antisymmetry_residual()
    return table


def curvature_table(D: LinearConnectionCoeffs, N: ConnectionField, p: WPoint) -> TensorTable:
    """
    Curvature coefficients of D in the adapted frame of N.

    R_abhk and R_ikab keep the stated sign and index pattern, which are not
    antisymmetric in their last pair; R_abhk_alt and R_ikab_alt are the
    antisymmetric readings.
    """
    _require_kind(N, "onTE")
    env = p.env()
    n, m = D.n, D.m
    L = D.values("L_ijk", env)      # L[i,j,k] = L^i_{jk}
    Lg = D.values("L_ijg", env)     # Lg[i,j,g] = L^i_{j gamma}
    Lk = D.values("L_abk", env)     # Lk[a,b,k] = L^alpha_{beta k}
    C = D.values("C_abg", env)      # C[a,b,g] = C^alpha_{beta gamma}
    dL = np.stack([D.derivative("L_ijk", env, f"z{k + 1}") for k in range(n)], axis=-1)    # [i,j,h,k] d_k L^i_{jh}
    dLg = np.stack([D.derivative("L_ijg", env, f"z{k + 1}") for k in range(n)], axis=-1)   # [i,h,b,k] d_k L^i_{h beta}
    dLk = np.stack([D.derivative("L_abk", env, f"z{h + 1}") for h in range(n)], axis=-1)   # [a,b,k,h] d_h L^a_{b k}
    dC = np.stack([D.derivative("C_abg", env, f"z{k + 1}") for k in range(n)], axis=-1)    # [a,g,b,k] d_k C^a_{g beta}
    dN = _connection_z_derivatives(N, env)                                                # [a,k,h] d_h N^a_k
    bracket = dN - np.transpose(dN, (0, 2, 1))                                            # [a,k,h] d_h N^a_k - d_k N^a_h

    # R^i_{jhk}
    R_ijhk = (dL - np.transpose(dL, (0, 1, 3, 2))
              + np.einsum("ljh,ilk->ijhk", L, L) - np.einsum("ljk,ilh->ijhk", L, L)
              - np.einsum("akh,ija->ijhk", bracket, Lg))
    # R^alpha_{beta hk}
    d_h_Lk = np.transpose(dLk, (0, 1, 3, 2))                                              # [a,b,h,k] d_h L^a_{b k}
    shared = d_h_Lk - np.transpose(d_h_Lk, (0, 1, 3, 2)) - np.einsum("gkh,agb->abhk", bracket, C)
    R_abhk = shared + np.einsum("gbk,agh->abhk", Lk, Lk) + np.einsum("gbh,agk->abhk", Lk, Lk)
    R_abhk_alt = shared + np.einsum("gbk,agh->abhk", Lk, Lk) - np.einsum("gbh,agk->abhk", Lk, Lk)
    # R^alpha_{gamma k beta}
    R_agkb = (np.transpose(dC, (0, 1, 3, 2))
              + np.einsum("sgb,ask->agkb", C, Lk) - np.einsum("sgk,asb->agkb", Lk, C))
    # R^i_{hk beta}
    R_ihkb = (np.transpose(dLg, (0, 1, 3, 2))
              + np.einsum("jhb,ijk->ihkb", Lg, L) - np.einsum("jhk,ijb->ihkb", L, Lg))
    # R^i_{k alpha beta}
    repeated = np.broadcast_to(np.einsum("jkb,ijb->ikb", Lg, Lg)[:, :, None, :], (n, n, m, m))
    R_ikab = repeated - np.einsum("jka,ijb->ikab", Lg, Lg)
    R_ikab_alt = np.einsum("jkb,ija->ikab", Lg, Lg) - np.einsum("jka,ijb->ikab", Lg, Lg)
    # R^sigma_{gamma alpha beta}
    R_sgab = np.einsum("tgb,sta->sgab", C, C) - np.einsum("tga,stb->sgab", C, C)

    table = TensorTable("curvature")
    table.add("R_ijhk", R_ijhk, "^i_{j h k}", (2, 3))
    table.add("R_abhk", R_abhk, "^alpha_{beta h k}")
    table.add("R_abhk_alt", R_abhk_alt, "^alpha_{beta h k}", (2, 3))
    table.add("R_agkb", R_agkb, "^alpha_{gamma k beta}")
    table.add("R_ihkb", R_ihkb, "^i_{h k beta}")
    table.add("R_ikab", R_ikab, "^i_{k alpha beta}")
    table.add("R_ikab_alt", R_ikab_alt, "^i_{k alpha beta}", (2, 3))
    table.add("R_sgab", R_sgab, "^sigma_{gamma alpha beta}", (2, 3))
    table.notes["R_abhk"] = "stated with +L^gamma_{beta h} L^alpha_{gamma k}; R_abhk_alt uses the minus sign"
    table.notes["R_ikab"] = "stated with L^j_{k beta} L^i_{j beta}; R_ikab_alt uses L^j_{k beta} L^i_{j alpha}"
    table.residuals["antisymmetry"] = table.antisymmetry_residual()
    return table
