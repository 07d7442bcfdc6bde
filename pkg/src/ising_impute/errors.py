"""Exception hierarchy shared by the library and the CLI.

Each exception carries the process exit code the CLI uses for it.
"""


class IsingImputeError(Exception):
    exit_code = 1


class ValidationError(IsingImputeError, ValueError):
    """Bad shapes, non-binary cells, invalid configuration."""

    exit_code = 2


class DimensionTooLargeError(ValidationError):
    """Exact enumeration requested beyond the supported number of items."""


class SPDError(IsingImputeError, ArithmeticError):
    """Cholesky factorization hit a non-positive pivot."""

    exit_code = 3

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot})")


class RecoveryError(IsingImputeError, ArithmeticError):
    """Parameter recovery from a restricted distribution failed."""

    exit_code = 3


class EmptyCompleteCaseError(IsingImputeError):
    """Listwise deletion left no rows."""

    exit_code = 4
