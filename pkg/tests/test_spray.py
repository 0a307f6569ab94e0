import math

import numpy as np
import pytest

from core.errors import DimensionMismatchError, IntegrationAbortError, RealityCheckError, SingularMetricError
from core.expression import VariableContext, parse
from core.spray import (
    SprayField,
    admissibility_residual,
    canonical_spray,
    homogeneity_residual,
    integrate,
    is_spray,
    liouville_bracket_residual,
    rk4_order_ratio,
    semispray_change_residual,
)
from core.wirtinger import WPoint
from harness.catalog import get_algebroid

CTX = VariableContext.total(1, 1)


@pytest.fixture
def trivial_spray():
    a, _ = get_algebroid("trivial")
    return SprayField.from_lagrangian(a, parse("z1*zb1*u1*ub1", CTX))


@pytest.mark.parametrize("z, u, expected", [
    (1.0, 2.0, 2.0),
    (2j, 1.0, -0.25j),
])
def test_canonical_spray_of_trivial_algebroid(z, u, expected):
    a, _ = get_algebroid("trivial")
    G = canonical_spray(a, parse("z1*zb1*u1*ub1", CTX), None, WPoint((z,), (u,)))
    assert G[0] == pytest.approx(expected)


def test_canonical_spray_rejects_complex_lagrangian():
    a, _ = get_algebroid("trivial")
    with pytest.raises(RealityCheckError):
        canonical_spray(a, parse("z1*u1*ub1", CTX), None, WPoint((1j,), (1.0,)))


def test_canonical_spray_rejects_degenerate_metric():
    a, _ = get_algebroid("trivial")
    with pytest.raises(SingularMetricError):
        canonical_spray(a, parse("z1*zb1", CTX), None, WPoint((1.0,), (1.0,)))


def test_lagrangian_dimensions_are_checked():
    a, _ = get_algebroid("trivial")
    with pytest.raises(DimensionMismatchError):
        SprayField.from_lagrangian(a, parse("u2*ub2", VariableContext.total(1, 2)))


def test_canonical_spray_is_a_spray(trivial_spray, algebroid_points):
    _, points = algebroid_points("trivial")
    assert is_spray(trivial_spray, points)
    for p in points:
        assert liouville_bracket_residual(trivial_spray, p) < 1e-9


def test_explicit_semispray_is_not_homogeneous():
    a, _ = get_algebroid("trivial")
    S = SprayField.from_texts(a, ["u1"])
    p = WPoint((1.0,), (1.0,))
    # G(z, 2u) - 4 G(z, u) = -2 at lambda = 2
    assert homogeneity_residual(S, p, [2.0]) == pytest.approx(2.0)
    assert liouville_bracket_residual(S, p) == pytest.approx(2.0)


def test_semispray_component_count():
    a, _ = get_algebroid("trivial")
    with pytest.raises(DimensionMismatchError):
        SprayField.from_texts(a, ["u1", "u1"])


def test_integral_curve_matches_closed_form(trivial_spray):
    # z z'' + z'^2 = 0 with z(0) = 1, z'(0) = 2 gives z = sqrt(1 + 4t)
    trajectory = integrate(trivial_spray, WPoint((1.0,), (2.0,)), t_end=0.5, step=1e-3)
    assert len(trajectory) == 501
    assert trajectory.times[-1] == pytest.approx(0.5)
    assert trajectory.z[-1, 0] == pytest.approx(math.sqrt(3), abs=1e-7)
    assert trajectory.u[-1, 0] == pytest.approx(2 / math.sqrt(3), abs=1e-7)
    a, _ = get_algebroid("trivial")
    assert admissibility_residual(trajectory, a) < 1e-6


def test_trajectory_frame_columns(trivial_spray):
    frame = integrate(trivial_spray, WPoint((1.0,), (2.0,)), t_end=0.1, step=0.02).to_frame()
    assert list(frame.columns) == ["t", "Re z1", "Im z1", "Re u1", "Im u1"]
    assert len(frame) == 6


def test_rk4_is_fourth_order(trivial_spray):
    ratio = rk4_order_ratio(trivial_spray, WPoint((1.0,), (2.0,)), 0.5, 0.01)
    assert 12.0 < ratio < 20.0


def test_linear_flow_is_integrated_exactly():
    a, _ = get_algebroid("trivial")
    S = SprayField.from_texts(a, ["0"])
    assert math.isinf(rk4_order_ratio(S, WPoint((1.0,), (2.0,)), 0.5, 0.1))


def test_integration_stops_near_singular_locus():
    a, _ = get_algebroid("scaled")
    # dz/dt = z u, du/dt = 0 runs z = exp(-t) toward the singular hyperplane z = 0
    S = SprayField.from_texts(a, ["0"])
    with pytest.raises(IntegrationAbortError) as info:
        integrate(S, WPoint((1.0,), (-1.0,)), t_end=5.0, step=0.01, exclusion_radius=0.1)
    assert info.value.last_t == pytest.approx(2.3, abs=0.05)


def test_integration_rejects_bad_steps(trivial_spray):
    with pytest.raises(ValueError):
        integrate(trivial_spray, WPoint((1.0,), (2.0,)), t_end=1.0, step=0.0)
    with pytest.raises(DimensionMismatchError):
        integrate(trivial_spray, WPoint((1.0, 1.0), (2.0,)))


def test_spray_vector_field_components(trivial_spray):
    values = trivial_spray.vector_field().values(WPoint((1.0,), (2.0,)).env())
    assert values["z1"] == pytest.approx(2.0)
    assert values["u1"] == pytest.approx(-4.0)
    assert np.allclose(trivial_spray.at(WPoint((1.0,), (2.0,))), [2.0])


def test_canonical_spray_is_covariant_across_charts(algebroid_points):
    a, points = algebroid_points("twochart")
    S = SprayField.from_lagrangian(a, parse("z1*zb1*u1*ub1", CTX))
    chart = a.charts[0]
    report = semispray_change_residual(S, chart, points)
    assert report.passed, [(c.name, c.max_residual) for c in report.failures()]
    assert report.environment["chart"] == chart.name


def test_wrong_spray_in_target_chart_is_rejected(algebroid_points):
    a, points = algebroid_points("twochart")
    S = SprayField.from_lagrangian(a, parse("z1*zb1*u1*ub1", CTX))
    chart = a.charts[0]
    target = S.transport(chart)
    extra = parse("u1^2", CTX)
    wrong = SprayField(tuple((lambda env, g=g: g(env) + extra(env)) for g in target.G), target.algebroid)
    report = semispray_change_residual(S, chart, points, wrong)
    assert not report.get("semispray.vertical_law").passed
    assert report.get("semispray.horizontal_law").passed
