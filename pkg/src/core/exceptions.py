"""
Application exceptions and their mapping to CLI exit codes.

Exit codes separate "the model is outside a theorem's hypotheses" (3) from
"the numerics failed" (4) and from bad input (2).
"""

from pydantic import ValidationError

from src.core.logging import get_logger

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_SOLVER = 4


class AppException(Exception):
    """Base exception for application errors."""

    def __init__(
        self,
        message: str,
        exit_code: int = EXIT_UNEXPECTED,
        error_code: str = "APP_ERROR",
    ):
        self.message = message
        self.exit_code = exit_code
        self.error_code = error_code
        super().__init__(message)


class ConfigError(AppException):
    """Invalid scenario configuration or operation parameters."""

    def __init__(self, message: str = "Invalid configuration"):
        super().__init__(
            message=message,
            exit_code=EXIT_CONFIG,
            error_code="CONFIG_ERROR",
        )


class ExpressionSyntaxError(AppException):
    """Expression text does not match the grammar."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(
            message=f"{message} at position {position}",
            exit_code=EXIT_CONFIG,
            error_code="EXPRESSION_SYNTAX",
        )


class UnknownIdentifierError(ExpressionSyntaxError):
    """Identifier is neither the variable x nor a supported function."""

    def __init__(self, name: str, position: int):
        self.name = name
        super().__init__(f"unknown identifier '{name}'", position)


class MeshError(AppException):
    """Mesh generator received a degenerate or invalid geometry."""

    def __init__(self, message: str = "Invalid mesh geometry"):
        super().__init__(
            message=message,
            exit_code=EXIT_CONFIG,
            error_code="MESH_ERROR",
        )


class HypothesisError(AppException):
    """A hypothesis of the theorem being realised does not hold."""

    def __init__(self, hypothesis: str, message: str | None = None):
        self.hypothesis = hypothesis
        super().__init__(
            message=message or f"hypothesis failed: {hypothesis}",
            exit_code=EXIT_HYPOTHESIS,
            error_code="HYPOTHESIS_FAILED",
        )


class EvaluationDomainError(AppException):
    """Expression evaluated outside its domain (ln of nonpositive value, pole)."""

    def __init__(self, message: str = "Evaluation outside function domain"):
        super().__init__(
            message=message,
            exit_code=EXIT_HYPOTHESIS,
            error_code="DOMAIN_ERROR",
        )


class SolverError(AppException):
    """Numerical failure."""

    def __init__(self, message: str = "Solver failure", error_code: str = "SOLVER_ERROR"):
        super().__init__(
            message=message,
            exit_code=EXIT_SOLVER,
            error_code=error_code,
        )


class FactorizationError(SolverError):
    """Sparse factorization broke down (singular at the requested shift)."""

    def __init__(self, message: str = "Matrix is exactly singular"):
        super().__init__(message=message, error_code="FACTORIZATION_ERROR")


class ConvergenceError(SolverError):
    """Iterative eigensolver did not converge."""

    def __init__(self, message: str = "Eigensolver did not converge"):
        super().__init__(message=message, error_code="CONVERGENCE_ERROR")


class ResolutionError(SolverError):
    """Grid too coarse: eigenvalues drift between two grid levels."""

    def __init__(self, message: str = "Grid under-resolved"):
        super().__init__(message=message, error_code="RESOLUTION_ERROR")


class ConsistencyError(SolverError):
    """A structural invariant failed (e.g. non-monotone eigenvalues in L)."""

    def __init__(self, message: str = "Numerical consistency check failed"):
        super().__init__(message=message, error_code="CONSISTENCY_ERROR")


def handle_exception(exc: BaseException) -> int:
    """Log an exception raised by a command and return its exit code."""
    logger = get_logger("errors")

    if isinstance(exc, AppException):
        level = logger.warning if exc.exit_code == EXIT_HYPOTHESIS else logger.error
        level(
            "command_failed",
            error=exc.error_code,
            message=exc.message,
            exit_code=exc.exit_code,
        )
        return exc.exit_code

    if isinstance(exc, ValidationError):
        logger.error(
            "command_failed",
            error="VALIDATION_ERROR",
            message="Invalid configuration",
            details=exc.errors(include_url=False),
            exit_code=EXIT_CONFIG,
        )
        return EXIT_CONFIG

    logger.exception("command_failed", error="INTERNAL_ERROR", exit_code=EXIT_UNEXPECTED)
    return EXIT_UNEXPECTED
