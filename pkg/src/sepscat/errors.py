"""Exception types shared by the scattering modules."""


class ScatteringError(Exception):
    """Base class for every error raised by the package."""


class DomainError(ScatteringError, ValueError):
    """An argument lies outside the region where the quantity is defined."""


class AccuracyError(ScatteringError):
    """A quadrature or truncation estimate exceeded its tolerance."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class DataError(ScatteringError, ValueError):
    """Input samples are non-finite or inconsistent."""


class ZeroSetError(ScatteringError):
    """Evaluation was requested inside a flagged zero neighbourhood."""


class PoleError(ScatteringError):
    """A rank-one update hit a vanishing denominator."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class RangeError(ScatteringError):
    """A root sits on the boundary of the scanned interval."""


class InconsistentDataError(DataError):
    """Scattering data do not belong to the admissible class."""


class DegenerateDataError(DataError):
    """Data carry no information (for instance a vanishing phase)."""


class GridRefinementError(ScatteringError):
    """The sampling grid is too coarse to resolve a feature."""


class ConfigError(ScatteringError, ValueError):
    """Malformed run configuration; carries the offending line when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
