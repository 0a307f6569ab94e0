"""
Exception hierarchy of the engine.

Structural check failures are report entries, never exceptions; everything
here signals input that cannot be evaluated at all.
"""
from typing import Optional


class AlgebroidError(Exception):
    """Base class for all engine errors."""


class ExpressionSyntaxError(AlgebroidError, ValueError):
    """Raised when an expression does not match the grammar."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UndeclaredVariableError(AlgebroidError, ValueError):
    """Raised for identifiers that the variable context does not declare."""

    def __init__(self, token: str, offset: int):
        super().__init__(f"Undeclared variable '{token}' (at byte {offset})")
        self.token = token
        self.offset = offset


class HolomorphyViolationError(AlgebroidError, ValueError):
    """Raised when zb/ub appears in a holomorphic context."""

    def __init__(self, token: str, offset: int):
        super().__init__(f"Conjugated variable '{token}' in a holomorphic context (at byte {offset})")
        self.token = token
        self.offset = offset


class EvaluationDomainError(AlgebroidError, ArithmeticError):
    """Raised when a subexpression cannot be evaluated (pole or branch point)."""

    def __init__(self, message: str, subexpression: Optional[str] = None):
        detail = f" in '{subexpression}'" if subexpression else ""
        super().__init__(f"{message}{detail}")
        self.subexpression = subexpression


class DimensionMismatchError(AlgebroidError, ValueError):
    """Raised when array shapes disagree with declared dimensions."""


class SingularMatrixError(AlgebroidError, ArithmeticError):
    """Raised when an elimination meets a zero pivot."""


class SingularJacobianError(SingularMatrixError):
    """Raised when a chart Jacobian is not invertible at a point."""


class SingularMetricError(SingularMatrixError):
    """Raised when a Hermitian metric is singular at a point."""

    def __init__(self, message: str, determinant: complex = 0.0):
        super().__init__(message)
        self.determinant = determinant


class SingularAnchorError(SingularMatrixError):
    """Raised when the anchor does not have the rank a procedure requires."""

    def __init__(self, message: str, rank: int = -1):
        super().__init__(message)
        self.rank = rank


class RealityCheckError(AlgebroidError, ValueError):
    """Raised when a Lagrangian takes non-real values."""

    def __init__(self, message: str, max_imag: float):
        super().__init__(message)
        self.max_imag = max_imag


class UnsupportedInputError(AlgebroidError, ValueError):
    """Raised for inputs outside the supported regime (indefinite metrics, missing chart data)."""


class IntegrationAbortError(AlgebroidError, RuntimeError):
    """Raised when an integral curve leaves the admissible region."""

    def __init__(self, reason: str, last_t: float):
        super().__init__(f"Integration aborted at t={last_t:.6g}: {reason}")
        self.reason = reason
        self.last_t = last_t


class ConfigError(AlgebroidError, ValueError):
    """Raised when a definition or scenario file cannot be loaded."""

    def __init__(self, message: str, path: Optional[str] = None):
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{message}")
        self.path = path
