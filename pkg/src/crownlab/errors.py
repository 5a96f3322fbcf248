"""Exception types raised across the package."""


class CrownlabError(Exception):
    """Base class for all package errors."""


class ParameterError(CrownlabError, ValueError):
    pass


class DimensionMismatchError(ParameterError):
    pass


class DomainError(CrownlabError, ValueError):
    """A point lies outside the domain on which a formula is valid."""


class SingularityError(CrownlabError, ValueError):
    """Evaluation at (or numerically on) a singular point or locus."""


class OutOfRegimeError(CrownlabError):
    """A solved parameter falls outside the admissible range.

    The offending value is kept on ``value`` so callers can still report it.
    """

    def __init__(self, message: str, value: float):
        super().__init__(message)
        self.value = value


class DegenerateProfileError(CrownlabError):
    pass


class EstimationError(CrownlabError):
    pass


class QuadratureError(CrownlabError):
    """Adaptive integration stopped before reaching the requested tolerance."""

    def __init__(self, message: str, estimate, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ConsistencyError(CrownlabError):
    pass


class NonConvergenceError(CrownlabError):
    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
