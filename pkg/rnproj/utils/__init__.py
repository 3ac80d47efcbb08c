from .errors import (
    DomainError,
    NumericalError,
    ParseError,
    RnprojError,
    SingularSystemError,
    ValidationError,
)

__all__ = [
    "DomainError",
    "NumericalError",
    "ParseError",
    "RnprojError",
    "SingularSystemError",
    "ValidationError",
]
