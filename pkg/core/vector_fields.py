"""
Holomorphic vector fields on the total space acting as derivations.

Brackets are never formed symbolically: both sides of an identity are applied
to a fixed family of polynomial test functions and compared pointwise.
"""
import logging
from typing import Any, Dict, List, Mapping, Union

from core.expression import Expression, VariableContext, parse
from core.wirtinger import Field, partial

logger = logging.getLogger(__name__)

Coefficient = Union[Field, complex, float, int]


def as_field(value: Coefficient) -> Field:
    if callable(value):
        return value
    constant = complex(value)
    return lambda env: constant


class VectorField:
    """X = sum_v X^v d/dv over coordinate variables v of E."""

    def __init__(self, components: Mapping[str, Coefficient]):
        self.components: Dict[str, Field] = {var: as_field(c) for var, c in components.items()}

    def apply(self, f: Field, env: Mapping[str, Any]) -> Any:
        total = 0j
        for var, coefficient in self.components.items():
            total = total + coefficient(env) * partial(f, env, var)
        return total

    def operator(self, f: Field) -> Field:
        """The field X(f)."""
        return lambda env: self.apply(f, env)

    def values(self, env: Mapping[str, Any]) -> Dict[str, Any]:
        return {var: coefficient(env) for var, coefficient in self.components.items()}

    def __add__(self, other: "VectorField") -> "VectorField":
        components = dict(self.components)
        for var, coefficient in other.components.items():
            if var in components:
                mine = components[var]
                components[var] = lambda env, a=mine, b=coefficient: a(env) + b(env)
            else:
                components[var] = coefficient
        return VectorField(components)

    def scaled(self, factor: Coefficient) -> "VectorField":
        factor = as_field(factor)
        return VectorField({var: (lambda env, c=c: factor(env) * c(env)) for var, c in self.components.items()})


def commutator_apply(X: VectorField, Y: VectorField, f: Field, env: Mapping[str, Any]) -> Any:
    """[X, Y](f) = X(Y f) - Y(X f)."""
    return X.apply(Y.operator(f), env) - Y.apply(X.operator(f), env)


def commutator(X: VectorField, Y: VectorField) -> VectorField:
    """Coordinate components [X, Y]^v = X(Y^v) - Y(X^v)."""
    variables = set(X.components) | set(Y.components)
    zero = as_field(0)
    components = {}
    for var in sorted(variables):
        x_v = X.components.get(var, zero)
        y_v = Y.components.get(var, zero)
        components[var] = (lambda env, xv=x_v, yv=y_v: X.apply(yv, env) - Y.apply(xv, env))
    return VectorField(components)


def base_test_functions(n: int) -> List[Expression]:
    """Polynomial functions on the base: a nonlinear core in z1 and z_n plus z_k, z_k z1 for every k."""
    ctx = VariableContext.base(n)
    last = f"z{n}"
    texts = ["z1", "z1^2", f"z1*{last} + {last}^3", f"(z1 + 1)^2*{last}", f"z1^3 - 2*{last}^2 + z1*{last}"]
    texts += [f"z{k}" for k in range(2, n + 1)]
    texts += [f"z{k}*z1" for k in range(2, n + 1)]
    return [parse(text, ctx) for text in texts]


def total_test_functions(n: int, m: int) -> List[Expression]:
    """The family {z^k, u^alpha, z^k u^alpha} on the total space."""
    ctx = VariableContext.holomorphic(n, m)
    texts = [f"z{k}" for k in range(1, n + 1)]
    texts += [f"u{a}" for a in range(1, m + 1)]
    texts += [f"z{k}*u{a}" for k in range(1, n + 1) for a in range(1, m + 1)]
    return [parse(text, ctx) for text in texts]
