import numpy as np
import pytest

from core.algebroid import ChartData, SectionExpr
from core.errors import DimensionMismatchError, SingularAnchorError
from core.expression import VariableContext, parse
from core.prolongation import (
    ProlongConnection,
    ProlongSection,
    ProlongVector,
    adapted_frame_bracket_residual,
    base_connection_from_prolongation,
    basis_bracket_residuals,
    complete_lift,
    lift_bracket_residuals,
    liouville_tangent_bracket_residual,
    nlc_from_base,
    nlc_from_spray,
    prolong_bracket,
    prolong_curvature,
    prolong_differential_check,
    prolong_nlc_change_residual,
    semispray_section,
    spray_connection_field,
    tangent_structure_apply,
    tangent_structure_image_residual,
    vertical_lift,
)
from core.spray import SprayField
from core.tangent_geometry import ConnectionField
from core.wirtinger import WPoint
from harness.catalog import get_algebroid


@pytest.mark.parametrize("name", ["submersion", "heisenberg-like", "tangent"])
def test_basis_brackets(name, algebroid_points):
    a, points = algebroid_points(name)
    assert basis_bracket_residuals(a, points).passed


def test_bracket_of_basis_sections_in_components():
    a, _ = get_algebroid("submersion")
    Z1, Z2 = ProlongSection.basis(2, 0), ProlongSection.basis(2, 1)
    Z, V = prolong_bracket(a, Z1, Z2).values(WPoint((0.5,), (1.0, 1.0)).env())
    assert np.allclose([complex(x) for x in Z], [1, 0])
    assert np.allclose([complex(x) for x in V], [0, 0])


def test_lift_brackets(algebroid_points):
    a, points = algebroid_points("submersion")
    s1 = SectionExpr.parse(["z1", "1"], 1)
    s2 = SectionExpr.parse(["1", "z1^2"], 1)
    report = lift_bracket_residuals(a, s1, s2, points)
    assert report.passed, [c.name for c in report.failures()]
    assert "lift.complete_complete" in report


def test_lifts_at_a_point():
    a, _ = get_algebroid("scaled")
    s = SectionExpr.parse(["z1^2"], 1)
    p = WPoint((2.0,), (3.0,))
    assert np.allclose(vertical_lift(s, p).V, [4])
    lifted = complete_lift(a, s, p)
    assert np.allclose(lifted.Z, [4])


def test_tangent_structure():
    w = ProlongVector([1.0, 2j], [3.0, 4.0], WPoint((0.0,), (1.0, 1.0)))
    image = tangent_structure_apply(w)
    assert np.allclose(image.Z, [0, 0])
    assert np.allclose(image.V, [1.0, 2j])
    assert tangent_structure_image_residual([w, image]) == 0.0


def test_prolongation_vector_parts_must_match():
    with pytest.raises(DimensionMismatchError):
        ProlongVector([1.0], [1.0, 2.0], WPoint((0.0,), (1.0,)))


@pytest.mark.parametrize("name", ["trivial", "submersion", "heisenberg-like"])
def test_liouville_and_tangent_structure(name):
    a, _ = get_algebroid(name)
    p = WPoint((0.7 + 0.1j,), tuple(1.0 + 0.5j * k for k in range(a.m)))
    assert liouville_tangent_bracket_residual(a, p) < 1e-12


def test_semispray_is_second_order():
    a, _ = get_algebroid("trivial")
    S = SprayField.from_lagrangian(a, parse("z1*zb1*u1*ub1", VariableContext.total(1, 1)))
    p = WPoint((1.0,), (2.0,))
    image = tangent_structure_apply(semispray_section(S, p))
    assert np.allclose(image.V, p.u)


def test_differential_squares_to_zero(algebroid_points):
    a, points = algebroid_points("heisenberg-like")
    assert prolong_differential_check(a, points).passed


def test_spray_connection_of_trivial_algebroid():
    a, _ = get_algebroid("trivial")
    S = SprayField.from_lagrangian(a, parse("z1*zb1*u1*ub1", VariableContext.total(1, 1)))
    # G = u^2 / (2z) so N = dG/du = u / z
    assert np.allclose(nlc_from_spray(a, S, None, WPoint((2.0,), (3.0,))), [[1.5]])


def test_adapted_frame_brackets(algebroid_points):
    a, points = algebroid_points("submersion")
    S = SprayField.from_lagrangian(a, parse("u1*ub1 + u2*ub2 + z1*zb1*u1*ub1", VariableContext.total(1, 2)))
    report = adapted_frame_bracket_residual(a, spray_connection_field(a, S), points[:2])
    assert report.passed, [c.name for c in report.failures()]


def test_curvature_of_flat_connection():
    a, _ = get_algebroid("tangent")
    zero = ConnectionField.zero("onProlongation", 2, 2)
    table = prolong_curvature(a, ProlongConnection.from_connection(zero), WPoint((1.0, 1.0), (1.0, 1.0)))
    assert not np.any(table["R"])


def test_connection_from_base():
    a, _ = get_algebroid("scaled")
    N = ConnectionField.from_texts("onTE", [["u1"]], 1, 1)
    induced = nlc_from_base(a, N, [WPoint((2.0,), (3.0,))])
    # N^beta_alpha = rho^k_alpha N^beta_k = z u
    assert np.allclose(induced.at(WPoint((2.0,), (3.0,))), [[6]])
    assert induced.residuals["anchor_adapted"] < 1e-12
    back = base_connection_from_prolongation(a, induced)
    assert np.allclose(back.value_array(WPoint((2.0,), (3.0,))), [[3]])


def test_base_connection_needs_square_anchor():
    a, _ = get_algebroid("immersion")
    with pytest.raises(SingularAnchorError):
        base_connection_from_prolongation(a, ProlongConnection(((lambda env: 0j,),), 1))


def test_spray_connection_under_identity_chart(algebroid_points):
    a, points = algebroid_points("submersion")
    S = SprayField.from_lagrangian(a, parse("u1*ub1 + u2*ub2", VariableContext.total(1, 2)))
    Np = spray_connection_field(a, S)
    report = prolong_nlc_change_residual(Np, Np, a, ChartData.identity(1, 2), points)
    assert report.passed
    assert "prolong_nlc.change_law" in report
