import cmath

import pytest
from hypothesis import given
from hypothesis import strategies as st

from core.errors import (
    EvaluationDomainError,
    ExpressionSyntaxError,
    HolomorphyViolationError,
    RealityCheckError,
    UndeclaredVariableError,
)
from core.expression import VariableContext, parse, reality_check
from core.wirtinger import WPoint

TOTAL = VariableContext.total(2, 2)
BASE = VariableContext.base(2)

finite = st.floats(min_value=-3, max_value=3, allow_nan=False, allow_infinity=False)


def test_evaluates_polynomial():
    e = parse("z1^2 + 3*z2 - 1", BASE)
    assert e({"z1": 2j, "z2": 1}) == pytest.approx(-4 + 3 - 1)


def test_complex_literal_is_folded():
    e = parse("1+2i", BASE)
    assert e.is_constant
    assert e({}) == 1 + 2j


def test_imaginary_unit_identifier():
    assert parse("i*i", BASE)({}) == pytest.approx(-1)


def test_eta_aliases_read_as_fiber_variables():
    e = parse("eta1*etab1", VariableContext.total(1, 1))
    assert e.variables() == frozenset({"u1", "ub1"})
    assert e({"u1": 1 + 1j, "ub1": 1 - 1j}) == pytest.approx(2)


def test_functions():
    e = parse("exp(z1) + log(z1) + sqrt(z1)", BASE)
    assert e({"z1": 4}) == pytest.approx(cmath.exp(4) + cmath.log(4) + 2)


def test_negative_integer_power():
    assert parse("z1^-2", BASE)({"z1": 2}) == pytest.approx(0.25)


@pytest.mark.parametrize("text, offset", [
    ("z1 +* z2", 4),
    ("(z1 + 1", 7),
    ("z1 $ 2", 3),
    ("", 0),
])
def test_syntax_errors_carry_byte_offset(text, offset):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse(text, BASE)
    assert info.value.offset == offset


@pytest.mark.parametrize("text", ["z3", "w1", "u1", "z0"])
def test_undeclared_variables(text):
    with pytest.raises(UndeclaredVariableError):
        parse(text, BASE)


def test_conjugate_in_holomorphic_context():
    with pytest.raises(HolomorphyViolationError) as info:
        parse("z1 + zb2", VariableContext.holomorphic(2, 2))
    assert info.value.token == "zb2"


@pytest.mark.parametrize("text", ["1/z1", "log(z1)", "sqrt(z1)", "z1^-1"])
def test_domain_errors_at_zero(text):
    with pytest.raises(EvaluationDomainError):
        parse(text, BASE)({"z1": 0})


def test_missing_assignment():
    with pytest.raises(EvaluationDomainError):
        parse("z1 + z2", BASE)({"z1": 1})


@pytest.mark.parametrize("text", [
    "z1*zb1*u1*ub1",
    "(1 + 2i)*z1 - 3.5*u2^2",
    "-z1 / (z2 + 4)",
    "exp(-u1) + 1e-05i*zb2",
])
def test_printer_round_trip(text):
    e = parse(text, TOTAL)
    again = parse(e.to_text(), TOTAL)
    env = WPoint((0.3 + 0.2j, 1.1 - 0.4j), (0.7j, -0.5 + 0.1j)).env()
    assert again(env) == pytest.approx(e(env))


def test_conjugate_expression():
    e = parse("(2+1i)*z1*ub1", TOTAL)
    env = WPoint((1 + 2j, 0), (3 - 1j, 0)).env()
    assert e.conjugate()(env) == pytest.approx(e(env).conjugate())


def test_formal_derivative_treats_conjugates_as_independent():
    e = parse("z1^3*zb1 + u1*ub1", TOTAL)
    d = e.differentiate("z1")
    env = WPoint((2, 0), (1, 0)).env()
    assert d(env) == pytest.approx(3 * 4 * 2)
    assert e.differentiate("zb1")(env) == pytest.approx(8)


def test_substitute():
    e = parse("z1*z2", BASE)
    result = e.substitute({"z2": parse("z1 + 1", BASE)})
    assert result({"z1": 2}) == pytest.approx(6)


def test_reality_check():
    points = [WPoint((1 + 1j,), (2 - 1j,)), WPoint((0.5,), (1j,))]
    real = parse("z1*zb1*u1*ub1", VariableContext.total(1, 1))
    assert reality_check(real, points) <= 1e-12
    with pytest.raises(RealityCheckError):
        reality_check(parse("z1*u1", VariableContext.total(1, 1)), points)


@given(finite, finite, finite, finite)
def test_hermitian_form_is_real(x, y, a, b):
    e = parse("z1*zb1*u1*ub1 + z1*ub1 + zb1*u1", VariableContext.total(1, 1))
    env = WPoint((complex(x, y),), (complex(a, b),)).env()
    assert abs(e(env).imag) <= 1e-9
