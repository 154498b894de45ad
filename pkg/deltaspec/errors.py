"""
Exceptions raised by the library. Every error is a ``ValueError`` so callers
that only care about "bad input or failed computation" can catch one type.
"""
import warnings


class DeltaspecError(ValueError):
    """Base class of every error raised by deltaspec."""


class DomainError(DeltaspecError):
    """An argument lies outside the domain of the operation."""


class ConvergenceError(DeltaspecError):
    """Successive quadrature refinements disagreed beyond the tolerance."""


class TruncationError(DeltaspecError):
    """A truncated spectral sum has a tail estimate above the tolerance."""


class SingularMatrixError(DeltaspecError):
    """The principal matrix is too close to singular to be inverted."""


class MissingConstantsError(DeltaspecError):
    """The constants registry has no entry for a geometry."""


class UnsupportedGeometryError(DeltaspecError):
    """The requested operation does not exist for this geometry or model."""


class WindowError(DeltaspecError):
    """An energy window leaves the admissible region of the model."""


class PositivityError(DeltaspecError):
    """An operator that the model guarantees to be positive definite is not."""


class ConfigurationError(DeltaspecError):
    """
    A run configuration failed validation.

    :param message: What was wrong.
    :param location: Dotted path (and line, when known) of the offending entry.
    """
    def __init__(self, message: str, location: str = "") -> None:
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class ScanWarning(UserWarning):
    """An eigenvalue scan grid was too coarse to resolve every crossing."""


def warn_scan(message: str) -> None:
    warnings.warn(message, ScanWarning, stacklevel=3)
