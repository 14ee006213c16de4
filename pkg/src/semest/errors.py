"""Exception types shared across the package."""


class SemestError(Exception):
    """Base class for all package errors."""


class DataError(SemestError):
    """Malformed input data (bad CSV row, empty sample, dimension mismatch)."""


class EvaluationError(SemestError):
    """A model quantity could not be evaluated (non-finite log-density, zero
    selection mass).  Carries the offending observation and/or parameters."""

    def __init__(self, message, observation=None, params=None):
        super().__init__(message)
        self.observation = observation
        self.params = params


class SingularInformationError(SemestError):
    """An information block that must be invertible is numerically singular.
    ``null_direction`` holds the offending eigenvector when available."""

    def __init__(self, message, null_direction=None):
        super().__init__(message)
        self.null_direction = null_direction


class ConvergenceError(SemestError):
    """An iterative solver failed where a result object cannot express it
    (e.g. the inner profile maximization of a validation check)."""
