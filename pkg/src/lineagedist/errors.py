"""Exception types raised by lineagedist."""


class LineageDistError(Exception):
    """Base class for all package errors."""


class DomainError(LineageDistError, ValueError):
    """An argument lies outside the domain of the requested function."""


class RegimeError(DomainError):
    """The operation is not defined for the parameter regime (e.g. critical)."""


class SeriesConvergenceError(LineageDistError, ArithmeticError):
    """A power series hit its term cap before the stopping rule fired."""

    def __init__(self, message, partial_sum=None, terms=None):
        super().__init__(message)
        self.partial_sum = partial_sum
        self.terms = terms


class QuadratureError(LineageDistError, ArithmeticError):
    """Adaptive quadrature could not reach the requested tolerance."""

    def __init__(self, message, estimate=None, error_estimate=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_estimate = error_estimate
