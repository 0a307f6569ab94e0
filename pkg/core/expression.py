"""
Expression language for closed-form complex functions.

Conjugated coordinates zb, ub are independent symbols, so Wirtinger
differentiation stays purely formal. Evaluation is generic over the scalar
algebra: plain complex numbers and dual numbers run the same code path.
"""
import cmath
import logging
import re
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Union

from core.errors import (
    EvaluationDomainError,
    ExpressionSyntaxError,
    HolomorphyViolationError,
    RealityCheckError,
    UndeclaredVariableError,
)

logger = logging.getLogger(__name__)

VARIABLE_CLASSES = ("z", "zb", "u", "ub")
HOLOMORPHIC_CLASSES = frozenset({"z", "u"})
FUNCTIONS = ("exp", "log", "sqrt")

_CONJUGATE_CLASS = {"z": "zb", "zb": "z", "u": "ub", "ub": "u"}
_ALIASES = {"eta": "u", "etab": "ub"}
_VARIABLE_PATTERN = re.compile(r"^(zb|z|ub|u|etab|eta)([1-9]\d*)$")

# Token specification, tried in order
TOKEN_TYPES = [
    ("NUMBER", r"(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?i?"),
    ("IDENT", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("PLUS", r"\+"),
    ("MINUS", r"-"),
    ("STAR", r"\*"),
    ("SLASH", r"/"),
    ("CARET", r"\^"),
    ("LPAREN", r"\("),
    ("RPAREN", r"\)"),
    ("WHITESPACE", r"\s+"),
    ("MISMATCH", r"."),
]
_TOKEN_REGEX = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in TOKEN_TYPES))


# ---------------------------------------------------------------------------
# Variable contexts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariableContext:
    """Declared dimensions and variable classes an expression may use."""
    n: int
    m: int
    allowed_classes: FrozenSet[str]

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError(f"Context dimensions must be positive, got n={self.n}, m={self.m}")
        unknown = set(self.allowed_classes) - set(VARIABLE_CLASSES)
        if unknown:
            raise ValueError(f"Unknown variable classes: {sorted(unknown)}")
        object.__setattr__(self, "allowed_classes", frozenset(self.allowed_classes))

    @classmethod
    def base(cls, n: int, m: int = 1) -> "VariableContext":
        """Holomorphic functions of z only."""
        return cls(n, m, frozenset({"z"}))

    @classmethod
    def holomorphic(cls, n: int, m: int) -> "VariableContext":
        return cls(n, m, HOLOMORPHIC_CLASSES)

    @classmethod
    def total(cls, n: int, m: int) -> "VariableContext":
        """Functions of (z, zb, u, ub) on the total space."""
        return cls(n, m, frozenset(VARIABLE_CLASSES))

    @property
    def is_holomorphic(self) -> bool:
        return self.allowed_classes <= HOLOMORPHIC_CLASSES

    def conjugate(self) -> "VariableContext":
        return VariableContext(self.n, self.m, frozenset(_CONJUGATE_CLASS[c] for c in self.allowed_classes))

    def union(self, other: "VariableContext") -> "VariableContext":
        return VariableContext(max(self.n, other.n), max(self.m, other.m),
                               self.allowed_classes | other.allowed_classes)

    def variables(self) -> List[str]:
        names = []
        for cls_name in VARIABLE_CLASSES:
            if cls_name in self.allowed_classes:
                count = self.n if cls_name in ("z", "zb") else self.m
                names.extend(f"{cls_name}{k}" for k in range(1, count + 1))
        return names

    def declares(self, name: str) -> bool:
        parsed = split_variable(name)
        if parsed is None:
            return False
        cls_name, index = parsed
        count = self.n if cls_name in ("z", "zb") else self.m
        return cls_name in self.allowed_classes and 1 <= index <= count

    def check(self, token: str, offset: int = 0) -> str:
        """Validate an identifier and return its canonical variable name."""
        parsed = split_variable(token)
        if parsed is None:
            raise UndeclaredVariableError(token, offset)
        cls_name, index = parsed
        if cls_name not in self.allowed_classes:
            if self.is_holomorphic and cls_name in ("zb", "ub"):
                raise HolomorphyViolationError(token, offset)
            raise UndeclaredVariableError(token, offset)
        count = self.n if cls_name in ("z", "zb") else self.m
        if not 1 <= index <= count:
            raise UndeclaredVariableError(token, offset)
        return f"{cls_name}{index}"


def split_variable(name: str) -> Optional[tuple]:
    """Split 'zb3' into ('zb', 3); eta/etab are read as u/ub."""
    match = _VARIABLE_PATTERN.match(name)
    if not match:
        return None
    cls_name = _ALIASES.get(match.group(1), match.group(1))
    return cls_name, int(match.group(2))


def conjugate_name(name: str) -> str:
    cls_name, index = split_variable(name)
    return f"{_CONJUGATE_CLASS[cls_name]}{index}"


# ---------------------------------------------------------------------------
# Tree nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: complex


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Func:
    name: str
    arg: "Node"


Node = Union[Const, Var, Neg, BinOp, Pow, Func]

ZERO = Const(0j)
ONE = Const(1 + 0j)


# ---------------------------------------------------------------------------
# Tokenizer and parser
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    type: str
    value: str
    position: int   # character index


def tokenize(text: str) -> List[Token]:
    tokens = []
    for match in _TOKEN_REGEX.finditer(text):
        kind = match.lastgroup
        if kind == "WHITESPACE":
            continue
        if kind == "MISMATCH":
            raise ExpressionSyntaxError(f"Unexpected character '{match.group()}'",
                                        _byte_offset(text, match.start()))
        tokens.append(Token(kind, match.group(), match.start()))
    return tokens


def _byte_offset(text: str, position: int) -> int:
    return len(text[:position].encode("utf-8"))


class Parser:
    """Recursive-descent parser for the expression grammar."""

    def __init__(self, text: str, context: VariableContext):
        self.text = text
        self.context = context
        self.tokens = tokenize(text)
        self.pos = 0

    def parse(self) -> Node:
        if not self.tokens:
            raise ExpressionSyntaxError("Empty expression", 0)
        node = self._expr()
        if self.pos < len(self.tokens):
            self._fail(f"Unexpected token '{self.tokens[self.pos].value}'")
        return node

    # helpers

    def _peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _expect(self, kind: str) -> Token:
        token = self._peek()
        if token is None or token.type != kind:
            self._fail(f"Expected {kind}")
        return self._advance()

    def _fail(self, message: str):
        token = self._peek()
        position = token.position if token is not None else len(self.text)
        raise ExpressionSyntaxError(message, _byte_offset(self.text, position))

    # grammar

    def _expr(self) -> Node:
        node = self._term()
        while self._peek() is not None and self._peek().type in ("PLUS", "MINUS"):
            op = "+" if self._advance().type == "PLUS" else "-"
            node = _fold_literals(op, node, self._term())
        return node

    def _term(self) -> Node:
        node = self._factor()
        while self._peek() is not None and self._peek().type in ("STAR", "SLASH"):
            op = "*" if self._advance().type == "STAR" else "/"
            node = BinOp(op, node, self._factor())
        return node

    def _factor(self) -> Node:
        token = self._peek()
        if token is not None and token.type == "MINUS":
            self._advance()
            operand = self._factor()
            if isinstance(operand, Const):
                return Const(-operand.value)
            return Neg(operand)
        if token is not None and token.type == "PLUS":
            self._advance()
            return self._factor()
        return self._power()

    def _power(self) -> Node:
        base = self._atom()
        token = self._peek()
        if token is not None and token.type == "CARET":
            self._advance()
            sign = 1
            token = self._peek()
            if token is not None and token.type in ("PLUS", "MINUS"):
                sign = -1 if self._advance().type == "MINUS" else 1
            token = self._peek()
            if token is None or token.type != "NUMBER" or not token.value.isdigit():
                self._fail("Integer exponent expected")
            self._advance()
            return Pow(base, sign * int(token.value))
        return base

    def _atom(self) -> Node:
        token = self._peek()
        if token is None:
            self._fail("Unexpected end of expression")
        if token.type == "NUMBER":
            self._advance()
            return Const(_number_value(token.value))
        if token.type == "IDENT":
            self._advance()
            name = token.value
            if name in FUNCTIONS:
                self._expect("LPAREN")
                arg = self._expr()
                self._expect("RPAREN")
                return Func(name, arg)
            if name == "i":
                return Const(1j)
            canonical = self.context.check(name, _byte_offset(self.text, token.position))
            return Var(canonical)
        if token.type == "LPAREN":
            self._advance()
            node = self._expr()
            self._expect("RPAREN")
            return node
        self._fail(f"Unexpected token '{token.value}'")


def _number_value(literal: str) -> complex:
    if literal.endswith("i"):
        return complex(0.0, float(literal[:-1]))
    return complex(float(literal), 0.0)


def _fold_literals(op: str, left: Node, right: Node) -> Node:
    """Literal sums such as 1+2i become one complex constant."""
    if isinstance(left, Const) and isinstance(right, Const):
        return Const(left.value + right.value if op == "+" else left.value - right.value)
    return BinOp(op, left, right)


def parse(text: Union[str, bytes], ctx: VariableContext) -> "Expression":
    """Parse text into an Expression whose variables all satisfy ctx."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    root = Parser(text, ctx).parse()
    return Expression(root, ctx)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def _format_real(x: float) -> str:
    if x == 0:
        return "0.0"
    return repr(float(x))


def to_text(node: Node) -> str:
    if isinstance(node, Const):
        re_part, im_part = node.value.real, node.value.imag
        if im_part == 0 and re_part >= 0:
            return _format_real(re_part)
        if re_part == 0 and im_part > 0:
            return f"{_format_real(im_part)}i"
        sign = "+" if im_part >= 0 else "-"
        return f"({_format_real(re_part)}{sign}{_format_real(abs(im_part))}i)"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Pow):
        return f"({to_text(node.base)}^{node.exponent})"
    if isinstance(node, Func):
        return f"{node.name}({to_text(node.arg)})"
    raise TypeError(f"Unknown node {node!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_CMATH = {"exp": cmath.exp, "log": cmath.log, "sqrt": cmath.sqrt}


def primal(x: Any) -> complex:
    """Value of x with every derivative part dropped."""
    return x.primal if hasattr(x, "primal") else x


def apply_function(name: str, x: Any) -> Any:
    method = getattr(x, name, None)
    if method is not None:
        return method()
    return _CMATH[name](x)


def evaluate(node: Node, assignment: Mapping[str, Any]) -> Any:
    """Evaluate a tree under an assignment of scalars to variable names."""
    try:
        return _evaluate(node, assignment)
    except (OverflowError, ZeroDivisionError) as e:
        raise EvaluationDomainError(f"Arithmetic failure ({e})", to_text(node)) from e


def _evaluate(node: Node, env: Mapping[str, Any]) -> Any:
    match node:
        case Const(value=value):
            return value
        case Var(name=name):
            try:
                return env[name]
            except KeyError:
                raise EvaluationDomainError(f"No value assigned to '{name}'") from None
        case Neg(operand=operand):
            return -_evaluate(operand, env)
        case BinOp(op=op, left=left, right=right):
            a = _evaluate(left, env)
            b = _evaluate(right, env)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if primal(b) == 0:
                raise EvaluationDomainError("Division by zero", to_text(node))
            return a / b
        case Pow(base=base, exponent=exponent):
            a = _evaluate(base, env)
            if exponent < 0 and primal(a) == 0:
                raise EvaluationDomainError("Negative power of zero", to_text(node))
            return a ** exponent
        case Func(name=name, arg=arg):
            a = _evaluate(arg, env)
            if name in ("log", "sqrt") and primal(a) == 0:
                raise EvaluationDomainError(f"{name} at a branch point", to_text(node))
            return apply_function(name, a)
    raise TypeError(f"Unknown node {node!r}")


# ---------------------------------------------------------------------------
# Tree transformations
# ---------------------------------------------------------------------------

def _add(a: Node, b: Node) -> Node:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return BinOp("+", a, b)


def _sub(a: Node, b: Node) -> Node:
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a: Node, b: Node) -> Node:
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return BinOp("*", a, b)


def _div(a: Node, b: Node) -> Node:
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return BinOp("/", a, b)


def _neg(a: Node) -> Node:
    if isinstance(a, Const):
        return Const(-a.value)
    return Neg(a)


def _derive(node: Node, var: str) -> Node:
    match node:
        case Const():
            return ZERO
        case Var(name=name):
            return ONE if name == var else ZERO
        case Neg(operand=operand):
            return _neg(_derive(operand, var))
        case BinOp(op="+", left=left, right=right):
            return _add(_derive(left, var), _derive(right, var))
        case BinOp(op="-", left=left, right=right):
            return _sub(_derive(left, var), _derive(right, var))
        case BinOp(op="*", left=left, right=right):
            return _add(_mul(_derive(left, var), right), _mul(left, _derive(right, var)))
        case BinOp(op="/", left=left, right=right):
            numerator = _sub(_mul(_derive(left, var), right), _mul(left, _derive(right, var)))
            return _div(numerator, Pow(right, 2))
        case Pow(base=base, exponent=exponent):
            inner = _derive(base, var)
            if exponent == 0 or inner == ZERO:
                return ZERO
            factor = ONE if exponent == 1 else Pow(base, exponent - 1)
            return _mul(_mul(Const(complex(exponent)), factor), inner)
        case Func(name=name, arg=arg):
            inner = _derive(arg, var)
            if inner == ZERO:
                return ZERO
            if name == "exp":
                return _mul(node, inner)
            if name == "log":
                return _div(inner, arg)
            return _div(inner, _mul(Const(2 + 0j), node))
    raise TypeError(f"Unknown node {node!r}")


def _conjugate(node: Node) -> Node:
    match node:
        case Const(value=value):
            return Const(value.conjugate())
        case Var(name=name):
            return Var(conjugate_name(name))
        case Neg(operand=operand):
            return Neg(_conjugate(operand))
        case BinOp(op=op, left=left, right=right):
            return BinOp(op, _conjugate(left), _conjugate(right))
        case Pow(base=base, exponent=exponent):
            return Pow(_conjugate(base), exponent)
        case Func(name=name, arg=arg):
            return Func(name, _conjugate(arg))
    raise TypeError(f"Unknown node {node!r}")


def _substitute(node: Node, mapping: Mapping[str, Node]) -> Node:
    match node:
        case Const():
            return node
        case Var(name=name):
            return mapping.get(name, node)
        case Neg(operand=operand):
            return Neg(_substitute(operand, mapping))
        case BinOp(op=op, left=left, right=right):
            return BinOp(op, _substitute(left, mapping), _substitute(right, mapping))
        case Pow(base=base, exponent=exponent):
            return Pow(_substitute(base, mapping), exponent)
        case Func(name=name, arg=arg):
            return Func(name, _substitute(arg, mapping))
    raise TypeError(f"Unknown node {node!r}")


def _free_variables(node: Node, acc: set) -> set:
    match node:
        case Var(name=name):
            acc.add(name)
        case Neg(operand=operand):
            _free_variables(operand, acc)
        case BinOp(left=left, right=right):
            _free_variables(left, acc)
            _free_variables(right, acc)
        case Pow(base=base):
            _free_variables(base, acc)
        case Func(arg=arg):
            _free_variables(arg, acc)
    return acc


# ---------------------------------------------------------------------------
# Expression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Expression:
    """An immutable parsed function together with its variable context."""
    root: Node
    context: VariableContext

    def __call__(self, assignment: Mapping[str, Any]) -> Any:
        return evaluate(self.root, assignment)

    def evaluate(self, assignment: Mapping[str, Any]) -> Any:
        return evaluate(self.root, assignment)

    def __str__(self) -> str:
        return to_text(self.root)

    def to_text(self) -> str:
        return to_text(self.root)

    def variables(self) -> FrozenSet[str]:
        return frozenset(_free_variables(self.root, set()))

    @property
    def is_holomorphic(self) -> bool:
        return all(split_variable(v)[0] in HOLOMORPHIC_CLASSES for v in self.variables())

    @property
    def is_constant(self) -> bool:
        return isinstance(self.root, Const)

    @classmethod
    def constant(cls, value: complex, ctx: VariableContext) -> "Expression":
        return cls(Const(complex(value)), ctx)

    @classmethod
    def variable(cls, name: str, ctx: VariableContext) -> "Expression":
        return cls(Var(ctx.check(name)), ctx)

    def conjugate(self) -> "Expression":
        """Conjugate tree: z and zb swap roles, literals are conjugated."""
        return Expression(_conjugate(self.root), self.context.conjugate())

    def substitute(self, mapping: Mapping[str, "Expression"], ctx: Optional[VariableContext] = None) -> "Expression":
        """Simultaneous substitution of variables by expressions."""
        nodes = {name: expr.root for name, expr in mapping.items()}
        return Expression(_substitute(self.root, nodes), ctx or self.context)

    def differentiate(self, var: str) -> "Expression":
        """Formal derivative tree with respect to one variable."""
        return Expression(_derive(self.root, var), self.context)


def combine(op: str, left: Expression, right: Expression, ctx: Optional[VariableContext] = None) -> Expression:
    """Build left <op> right with trivial zero/one pruning."""
    builders = {"+": _add, "-": _sub, "*": _mul, "/": _div}
    return Expression(builders[op](left.root, right.root), ctx or left.context.union(right.context))


def expression_sum(terms: Iterable[Expression], ctx: VariableContext) -> Expression:
    root = ZERO
    for term in terms:
        root = _add(root, term.root)
    return Expression(root, ctx)


def reality_check(expr: Expression, points: Iterable[Any], tol: float = 1e-12) -> float:
    """
    Verify that a Lagrangian is real-valued at the given points.

    Args:
        expr: Expression in (z, zb, u, ub)
        points: WPoint-like objects (with env()) or assignments
        tol: Largest admissible imaginary part

    Returns:
        The maximal absolute imaginary part seen
    """
    worst = 0.0
    for point in points:
        env: Dict[str, Any] = point.env() if hasattr(point, "env") else dict(point)
        worst = max(worst, abs(complex(expr(env)).imag))
    if worst > tol:
        raise RealityCheckError(f"Expression '{expr}' is not real-valued (max |Im| = {worst:.3e})", worst)
    return worst


def negate(expr: Expression) -> Expression:
    return Expression(_neg(expr.root), expr.context)
