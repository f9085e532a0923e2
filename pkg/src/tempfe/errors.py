"""Exception hierarchy.

Validation problems (bad input files, bad configuration) and estimation
problems (numerical failures) are kept apart so the command line can map
them onto distinct exit codes.
"""


class TempFEError(Exception):
    """Base class for all package errors."""


class ValidationError(TempFEError, ValueError):
    """Input data or configuration violates a contract."""


class SchemaError(ValidationError):
    """A mandatory column is missing from a CSV header."""


class EstimationError(TempFEError, RuntimeError):
    """A regression could not be carried out."""


class EmptySampleError(EstimationError):
    pass


class RankError(EstimationError):
    pass


class DofExhaustedError(EstimationError):
    pass


class InsufficientClustersError(EstimationError):
    pass


class ConvergenceError(EstimationError):
    """Alternating projections hit the iteration cap."""

    def __init__(self, message, last_change=None, iterations=None):
        super().__init__(message)
        self.last_change = last_change
        self.iterations = iterations
