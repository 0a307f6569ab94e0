"""
Forward-mode Wirtinger differentiation.

Dual numbers carry one nilpotent generator each. Every differentiation
request allocates a fresh tag, and a dual with a larger tag treats duals of
smaller tags as scalars, so derivatives of derived evaluators (which differentiate
internally) nest without perturbation confusion.
"""
import cmath
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.errors import DimensionMismatchError
from core.expression import Expression, split_variable

logger = logging.getLogger(__name__)

_TAGS = itertools.count(1)

# A field is anything evaluable on an assignment: Expressions and derived closures.
Field = Callable[[Mapping[str, Any]], Any]


class Dual:
    """Scalar real + eps*e with e^2 = 0; components may themselves be duals of lower tags."""

    __slots__ = ("tag", "real", "eps")

    def __init__(self, tag: int, real: Any, eps: Any = 0):
        self.tag = tag
        self.real = real
        self.eps = eps

    def __repr__(self):
        return f"Dual[{self.tag}]({self.real!r} + {self.eps!r} e)"

    @property
    def primal(self) -> complex:
        value = self.real
        while isinstance(value, Dual):
            value = value.real
        return value

    def _split(self, other: Any) -> Tuple[int, Any, Any, Any, Any]:
        other_tag = other.tag if isinstance(other, Dual) else 0
        tag = max(self.tag, other_tag)
        a_real, a_eps = (self.real, self.eps) if self.tag == tag else (self, 0)
        b_real, b_eps = (other.real, other.eps) if other_tag == tag else (other, 0)
        return tag, a_real, a_eps, b_real, b_eps

    def __add__(self, other):
        tag, ar, ae, br, be = self._split(other)
        return Dual(tag, ar + br, ae + be)

    __radd__ = __add__

    def __sub__(self, other):
        tag, ar, ae, br, be = self._split(other)
        return Dual(tag, ar - br, ae - be)

    def __rsub__(self, other):
        tag, ar, ae, br, be = self._split(other)
        return Dual(tag, br - ar, be - ae)

    def __mul__(self, other):
        tag, ar, ae, br, be = self._split(other)
        return Dual(tag, ar * br, ar * be + ae * br)

    __rmul__ = __mul__

    def __truediv__(self, other):
        tag, ar, ae, br, be = self._split(other)
        value = ar / br
        return Dual(tag, value, (ae - value * be) / br)

    def __rtruediv__(self, other):
        tag, ar, ae, br, be = self._split(other)
        value = br / ar
        return Dual(tag, value, (be - value * ae) / ar)

    def __neg__(self):
        return Dual(self.tag, -self.real, -self.eps)

    def __pos__(self):
        return self

    def __pow__(self, power: int, modulo=None):
        if power == 0:
            return Dual(self.tag, self.real ** 0, 0)
        return Dual(self.tag, self.real ** power, power * (self.real ** (power - 1)) * self.eps)

    def exp(self):
        value = _exp(self.real)
        return Dual(self.tag, value, value * self.eps)

    def log(self):
        return Dual(self.tag, _log(self.real), self.eps / self.real)

    def sqrt(self):
        value = _sqrt(self.real)
        return Dual(self.tag, value, self.eps / (2 * value))


def _exp(x):
    return x.exp() if isinstance(x, Dual) else cmath.exp(x)


def _log(x):
    return x.log() if isinstance(x, Dual) else cmath.log(x)


def _sqrt(x):
    return x.sqrt() if isinstance(x, Dual) else cmath.sqrt(x)


def tangent(x: Any, tag: int) -> Any:
    """The coefficient of the generator with the given tag."""
    if isinstance(x, Dual):
        if x.tag == tag:
            return x.eps
        if x.tag > tag:
            return Dual(x.tag, tangent(x.real, tag), tangent(x.eps, tag))
    return 0j


def strip(x: Any, tag: int) -> Any:
    """Drop the generator with the given tag."""
    if isinstance(x, Dual):
        if x.tag == tag:
            return x.real
        if x.tag > tag:
            return Dual(x.tag, strip(x.real, tag), strip(x.eps, tag))
    return x


def primal(x: Any) -> complex:
    return x.primal if isinstance(x, Dual) else x


# ---------------------------------------------------------------------------
# Points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WPoint:
    """A point of the total space E in local coordinates (z, u)."""
    z: Tuple[complex, ...]
    u: Tuple[complex, ...] = ()

    def __post_init__(self):
        z = tuple(complex(v) for v in self.z)
        u = tuple(complex(v) for v in self.u)
        for value in z + u:
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise ValueError(f"Non-finite coordinate in point: z={z}, u={u}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def m(self) -> int:
        return len(self.u)

    def env(self) -> Dict[str, complex]:
        """Assignment with zb, ub bound to the conjugates."""
        env: Dict[str, complex] = {}
        for k, value in enumerate(self.z, start=1):
            env[f"z{k}"] = value
            env[f"zb{k}"] = value.conjugate()
        for a, value in enumerate(self.u, start=1):
            env[f"u{a}"] = value
            env[f"ub{a}"] = value.conjugate()
        return env

    def with_fiber(self, u: Sequence[complex]) -> "WPoint":
        return WPoint(self.z, tuple(u))

    def shifted(self, var: str, delta: complex) -> "WPoint":
        """Move the coordinate underlying var (its conjugate follows)."""
        cls_name, index = split_variable(var)
        z, u = list(self.z), list(self.u)
        target = z if cls_name in ("z", "zb") else u
        target[index - 1] += delta
        return WPoint(tuple(z), tuple(u))

    def as_dict(self) -> Dict[str, list]:
        return {
            "z": [[v.real, v.imag] for v in self.z],
            "u": [[v.real, v.imag] for v in self.u],
        }


@dataclass
class WirtingerJet:
    """Value and requested Wirtinger partials of a function at a point."""
    value: complex
    d1: Dict[str, complex] = field(default_factory=dict)
    d2: Dict[Tuple[str, str], complex] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Differentiation of fields
# ---------------------------------------------------------------------------

def _seeded(env: Mapping[str, Any], seeds: Mapping[str, Any], tag: int) -> Dict[str, Any]:
    seeded = dict(env)
    for name, coefficient in seeds.items():
        seeded[name] = Dual(tag, env[name], coefficient)
    return seeded


def directional(f: Field, env: Mapping[str, Any], direction: Mapping[str, Any]) -> Any:
    """Derivative of f along formal directions {variable: coefficient}."""
    tag = next(_TAGS)
    return tangent(f(_seeded(env, direction, tag)), tag)


def partial(f: Field, env: Mapping[str, Any], var: str) -> Any:
    """Wirtinger partial df/dvar; zb/ub are independent variables here."""
    if var not in env:
        raise DimensionMismatchError(f"Variable '{var}' not present in the assignment")
    return directional(f, env, {var: 1})


def second_partial(f: Field, env: Mapping[str, Any], a: str, b: str) -> Any:
    """d^2 f / da db by one level of nesting."""
    return partial(lambda inner: partial(f, inner, b), env, a)


def directional_second(f: Field, env: Mapping[str, Any],
                       first: Mapping[str, Any], second: Mapping[str, Any]) -> Any:
    return directional(lambda inner: directional(f, inner, second), env, first)


def derivative_field(f: Field, var: str) -> Field:
    """The field x -> df/dvar(x)."""
    return lambda env: partial(f, env, var)


def gradient(f: Field, env: Mapping[str, Any], variables: Iterable[str]) -> np.ndarray:
    return np.array([complex(partial(f, env, v)) for v in variables], dtype=complex)


# ---------------------------------------------------------------------------
# Jets of expressions
# ---------------------------------------------------------------------------

def _check_dimensions(e: Expression, p: WPoint):
    for name in e.variables():
        cls_name, index = split_variable(name)
        count = p.n if cls_name in ("z", "zb") else p.m
        if index > count:
            raise DimensionMismatchError(
                f"Expression uses '{name}' but the point has n={p.n}, m={p.m}")


def jet(e: Expression, p: WPoint, order: int = 1, wanted: Optional[Iterable[Any]] = None) -> WirtingerJet:
    """
    Exact Wirtinger partials of an expression at a point.

    Args:
        e: Expression to differentiate
        p: Evaluation point; zb/ub take conj(z)/conj(u)
        order: 1 or 2
        wanted: variable names (first order) and/or (a, b) pairs (second order);
            defaults to every declared variable (and every pair for order 2)

    Returns:
        WirtingerJet with only the requested entries populated
    """
    if order not in (1, 2):
        raise ValueError(f"Only first and second order jets are supported, got {order}")
    _check_dimensions(e, p)
    env = p.env()
    names = [v for v in e.context.variables() if v in env]
    if wanted is None:
        wanted = list(names)
        if order == 2:
            wanted += [(a, b) for a in names for b in names]

    singles, pairs = [], []
    for item in wanted:
        if isinstance(item, str):
            singles.append(item)
        else:
            if order < 2:
                raise ValueError("Pairs were requested from a first order jet")
            pairs.append(tuple(item))

    result = WirtingerJet(value=complex(e(env)))
    for var in singles:
        result.d1[var] = complex(partial(e, env, var))
    for a, b in pairs:
        if (a, b) in result.d2:
            continue
        value = complex(second_partial(e, env, a, b))
        result.d2[(a, b)] = value
        result.d2[(b, a)] = value
    return result


def fd_oracle(e: Expression, p: WPoint, var: str, h: float = 1e-5) -> complex:
    """
    Central-difference Wirtinger derivative with conjugates slaved to the point.

    d/dz = (d/dx - i d/dy)/2 and d/dzb = (d/dx + i d/dy)/2.
    """
    if h <= 0:
        raise ValueError("Finite-difference step must be positive")
    _check_dimensions(e, p)

    def f(point: WPoint) -> complex:
        return complex(e(point.env()))

    dx = (f(p.shifted(var, h)) - f(p.shifted(var, -h))) / (2 * h)
    dy = (f(p.shifted(var, 1j * h)) - f(p.shifted(var, -1j * h))) / (2 * h)
    cls_name, _ = split_variable(var)
    if cls_name in ("zb", "ub"):
        return 0.5 * (dx + 1j * dy)
    return 0.5 * (dx - 1j * dy)
