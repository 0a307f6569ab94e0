import logging

import numpy as np
import pytest

from core import lagrange_induction
from core.errors import DimensionMismatchError, SingularAnchorError, SingularMetricError, UnsupportedInputError
from core.lagrange_induction import (
    LagrangeStructure,
    case1_connection_transport,
    case1_pullback,
    case1_round_trip_residual,
    case2_completion,
    case2_induced_connection,
    case3_chern_lagrange_residual,
    case3_completion,
    case3_induced_connection,
    chern_lagrange_coincidence_residual,
    chern_lagrange_field,
    chern_lagrange_on_TM,
    completion_invariance_residual,
    eta_point,
    induction_case,
    induction_report,
    metric_from_lagrangian,
    pullback_lagrangian,
)
from core.tangent_geometry import ConnectionField
from core.wirtinger import WPoint
from harness.catalog import default_lagrangian, get_algebroid


def test_metric_and_inverse():
    L = LagrangeStructure.parse("u1*ub1 + u1*ub2 + u2*ub1 + 2*u2*ub2", "onE", 1, 2)
    metric = metric_from_lagrangian(L, WPoint((0.3,), (1.0, -1.0)))
    assert np.allclose(metric.matrix, [[1, 1], [1, 2]])
    assert np.allclose(metric.inverse, [[2, -1], [-1, 1]])
    assert metric.rank == 2
    assert metric.hermitian_residual == 0.0


def test_degenerate_metric():
    L = LagrangeStructure.parse("z1*zb1", "onE", 1, 1)
    with pytest.raises(SingularMetricError):
        metric_from_lagrangian(L, WPoint((1.0,), (1.0,)))


def test_chern_lagrange_connection_on_tangent_bundle():
    L = LagrangeStructure.parse("z1*zb1*eta1*etab1", "onTM", 1)
    # g = |z|^2, d^2L/dz deta-bar = zb eta, N = eta / z
    assert np.allclose(chern_lagrange_on_TM(L, WPoint((1.0,), (2.0,))), [[2]])
    field = chern_lagrange_field(L)
    assert field.kind == "onTM"
    assert np.allclose(field.value_array(WPoint((2.0,), (3.0,))), [[1.5]])


def test_lagrangian_domains():
    with pytest.raises(ValueError):
        LagrangeStructure.parse("u1*ub1", "onF", 1, 1)
    with pytest.raises(DimensionMismatchError):
        LagrangeStructure.parse("u1*ub1", "onE", 1)
    onTM = LagrangeStructure.parse("eta1*etab1", "onTM", 1)
    a, _ = get_algebroid("twochart")
    with pytest.raises(UnsupportedInputError):
        onTM.transport(a.charts[0])


@pytest.mark.parametrize("name, z, expected", [
    ("scaled", (0.5,), 1),
    ("tangent", (0.5, 0.5), 1),
    ("immersion", (0.5, 0.5), 2),
    ("submersion", (0.5,), 3),
    ("heisenberg-like", (0.5,), 3),
])
def test_induction_case(name, z, expected):
    a, _ = get_algebroid(name)
    assert induction_case(a, WPoint(z, (1.0,) * a.m)) == expected


def test_induction_case_at_singular_locus():
    a, _ = get_algebroid("scaled")
    with pytest.raises(SingularAnchorError):
        induction_case(a, WPoint((0.0,), (1.0,)))


# ---------------------------------------------------------------------------
# Case I
# ---------------------------------------------------------------------------

def test_pullback_along_scaled_anchor():
    a, _ = get_algebroid("scaled")
    L = LagrangeStructure.parse("eta1*etab1", "onTM", 1)
    pulled = case1_pullback(a, L, WPoint((2.0,), (3.0,)))
    # L* = |z u|^2
    assert pulled.L_star == pytest.approx(36)
    assert np.allclose(pulled.metric, [[4]])
    assert pulled.residuals["metric_pullback"] < 1e-12
    assert np.allclose(pulled.N, [[1.5]])
    assert pullback_lagrangian(a, L).domain == "onE"


def test_pullback_needs_invertible_anchor():
    a, _ = get_algebroid("scaled")
    L = LagrangeStructure.parse("eta1*etab1", "onTM", 1)
    with pytest.raises(SingularAnchorError):
        case1_pullback(a, L, WPoint((0.0,), (1.0,)))
    immersion, _ = get_algebroid("immersion")
    with pytest.raises(SingularAnchorError):
        case1_connection_transport(immersion, ConnectionField.zero("onTE", 2, 1), "E_to_TM",
                                   WPoint((1.0, 1.0), (1.0,)))


def test_connection_transport_along_scaled_anchor():
    a, _ = get_algebroid("scaled")
    p = WPoint((2.0,), (1.0,))
    # N* = rho N - drho/dz u = -1 for N = 0
    assert np.allclose(case1_connection_transport(a, ConnectionField.zero("onTE", 1, 1), "E_to_TM", p), [[-1]])
    with pytest.raises(DimensionMismatchError):
        case1_connection_transport(a, ConnectionField.zero("onTE", 1, 1), "TM_to_E", p)
    with pytest.raises(ValueError):
        case1_connection_transport(a, ConnectionField.zero("onTE", 1, 1), "sideways", p)


def test_connection_round_trip(algebroid_points):
    a, points = algebroid_points("scaled")
    N = ConnectionField.from_texts("onTE", [["z1*u1 + 1"]], 1, 1)
    assert case1_round_trip_residual(a, N, points) < 1e-10


def test_round_trip_logs_each_point_residual(monkeypatch, caplog):
    a, _ = get_algebroid("scaled")
    N = ConnectionField.from_texts("onTE", [["z1*u1 + 1"]], 1, 1)
    points = [WPoint((2.0,), (3.0,)), WPoint((1.0,), (1.0,))]
    offsets = iter([1.0, 0.0])
    transport = lagrange_induction.case1_connection_transport

    def offset_transport(a, N, direction, p):
        value = transport(a, N, direction, p)
        return value + next(offsets) if direction == "TM_to_E" else value

    monkeypatch.setattr(lagrange_induction, "case1_connection_transport", offset_transport)
    module_logger = logging.getLogger("core.lagrange_induction")
    module_logger.addHandler(caplog.handler)
    try:
        with caplog.at_level(logging.DEBUG, logger="core.lagrange_induction"):
            worst = case1_round_trip_residual(a, N, points)
    finally:
        module_logger.removeHandler(caplog.handler)
    logged = [float(r.getMessage().rsplit(" ", 1)[1]) for r in caplog.records if r.getMessage().startswith("Round trip")]
    assert worst == pytest.approx(1.0)
    assert logged[0] == pytest.approx(1.0)
    assert logged[1] < 1e-10


def test_eta_point():
    a, _ = get_algebroid("immersion")
    q = eta_point(a, WPoint((1.0, 0.0), (2.0,)))
    assert np.allclose(q.u, [2, 2])


# ---------------------------------------------------------------------------
# Case II
# ---------------------------------------------------------------------------

@pytest.fixture
def flat_immersion():
    a, _ = get_algebroid("immersion")
    return a, LagrangeStructure.parse("eta1*etab1 + eta2*etab2", "onTM", 2)


def test_orthonormal_completion(flat_immersion):
    a, L = flat_immersion
    completion = case2_completion(a, L, WPoint((1.0, 0.0), (1.0,)))
    # rho = (1, 1) so the unit complement is (1, -1) / sqrt(2) up to a phase
    Y = completion.Y[:, 0]
    assert abs(Y[0] + Y[1]) < 1e-12
    assert abs(abs(Y[0]) - 1 / np.sqrt(2)) < 1e-12
    assert max(completion.residuals.values()) < 1e-12


def test_induced_connection_on_immersion(flat_immersion):
    a, L = flat_immersion
    p = WPoint((1.0, 0.0), (1.0,))
    result = case2_induced_connection(a, L, chern_lagrange_field(L), p)
    # H = [[0, 0], [u, 0]] and rho^-1 = (1/2, 1/2)
    assert result.case == 2
    assert np.allclose(result.N, [[0.5, 0]])
    assert np.allclose(result.extras["H"], [[0, 0], [1, 0]])
    assert result.residuals["frame_relation"] < 1e-12
    assert chern_lagrange_coincidence_residual(a, L, p) < 1e-9


def test_completion_needs_positive_metric():
    a, _ = get_algebroid("immersion")
    L = LagrangeStructure.parse("-eta1*etab1 - eta2*etab2", "onTM", 2)
    with pytest.raises(UnsupportedInputError):
        case2_completion(a, L, WPoint((1.0, 0.0), (1.0,)))


def test_case2_needs_fewer_sections_than_base_dimension():
    a, _ = get_algebroid("submersion")
    L = LagrangeStructure.parse("eta1*etab1", "onTM", 1)
    with pytest.raises(DimensionMismatchError):
        case2_completion(a, L, WPoint((1.0,), (1.0, 1.0)))


def test_case2_expects_tangent_connection(flat_immersion):
    a, L = flat_immersion
    with pytest.raises(DimensionMismatchError):
        case2_induced_connection(a, L, ConnectionField.zero("onTE", 2, 1), WPoint((1.0, 0.0), (1.0,)))


# ---------------------------------------------------------------------------
# Case III
# ---------------------------------------------------------------------------

@pytest.fixture
def flat_submersion():
    a, _ = get_algebroid("submersion")
    return a, LagrangeStructure.parse("u1*ub1 + u2*ub2", "onE", 1, 2)


def test_induced_connection_on_submersion(flat_submersion):
    a, L = flat_submersion
    p = WPoint((1.0,), (1.0, 1.0))
    result = case3_induced_connection(a, L, ConnectionField.zero("onTE", 1, 2), p)
    # N^k_h = -u^alpha drho^k_alpha/dz^h = -u2
    assert result.case == 3
    assert np.allclose(result.N, [[-1]])
    assert np.allclose(result.extras["metric_TM"], [[0.5]])
    assert result.residuals["frame_horizontal"] < 1e-12
    assert result.residuals["frame_vertical"] < 1e-12
    assert result.residuals["metric_directional"] < 1e-12
    assert result.residuals["metric_rank_deficit"] == 0


def test_normal_completion(flat_submersion):
    a, L = flat_submersion
    completion = case3_completion(a, L, WPoint((1.0,), (1.0, 1.0)))
    assert completion.Y.shape == (1, 2)
    assert abs(completion.Y[0, 0] + completion.Y[0, 1]) < 1e-12
    assert max(completion.residuals.values()) < 1e-12


def test_transported_chern_lagrange_connection(flat_submersion, algebroid_points):
    a, L = flat_submersion
    assert case3_chern_lagrange_residual(a, L, WPoint((1.0,), (1.0, 1.0))) < 1e-10
    _, points = algebroid_points("submersion")
    curved = default_lagrangian(a)
    for p in points:
        assert case3_chern_lagrange_residual(a, curved, p) < 1e-8
    assert completion_invariance_residual(a, curved, points) < 1e-8


def test_case3_needs_lagrangian_on_E(flat_submersion):
    a, _ = flat_submersion
    L = LagrangeStructure.parse("eta1*etab1", "onTM", 1)
    with pytest.raises(DimensionMismatchError):
        case3_completion(a, L, WPoint((1.0,), (1.0, 1.0)))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name, case", [
    ("scaled", 1),
    ("immersion", 2),
    ("submersion", 3),
])
def test_induction_report_on_catalog(name, case, algebroid_points):
    a, points = algebroid_points(name)
    report = induction_report(a, default_lagrangian(a), points)
    assert report.passed, [(c.name, c.max_residual) for c in report.failures()]
    assert any(check.name.startswith(f"case{case}.") for check in report.checks)


def test_induction_report_rejects_wrong_domain(algebroid_points):
    a, points = algebroid_points("submersion")
    with pytest.raises(UnsupportedInputError):
        induction_report(a, LagrangeStructure.parse("eta1*etab1", "onTM", 1), points, case=3)
    with pytest.raises(ValueError):
        induction_report(a, default_lagrangian(a), [])
