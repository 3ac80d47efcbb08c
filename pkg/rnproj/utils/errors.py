"""
Exception hierarchy for the rnproj package.
Each error carries the process exit code the CLI reports for it.
"""


class RnprojError(Exception):
    """Base class for all rnproj errors."""

    exit_code = 1


class ValidationError(RnprojError, ValueError):
    """Malformed inputs: missing quotes, duplicate strikes, unsorted points."""

    exit_code = 2


class DomainError(RnprojError, ValueError):
    """Inputs outside the mathematical domain of an operation."""

    exit_code = 2


class ParseError(ValidationError):
    """File parse failure, reported as ``path:line: message``."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        self.detail = message
        super().__init__(f"{self.path}:{line}: {message}")


class SingularSystemError(RnprojError, ArithmeticError):
    """Rank-deficient design or Gram matrix.

    Args:
        message: Human readable description
        offending: Labels of the basis elements (or indices) found dependent
    """

    exit_code = 3

    def __init__(self, message, offending=()):
        self.offending = tuple(offending)
        super().__init__(message)


class NumericalError(RnprojError, ArithmeticError):
    """Internal solver failure (infeasible program, failed root bracket)."""

    exit_code = 3
