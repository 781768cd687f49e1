"""Exception hierarchy shared by every module."""


class PowerPostError(Exception):
    """Base class for all library errors."""


class ParameterError(PowerPostError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(PowerPostError, ValueError):
    """A parameter lies outside the forward model's domain."""


class ModelError(PowerPostError):
    """The model or data produced an unusable value (e.g. a non-finite log-likelihood)."""


class NumericError(PowerPostError, ArithmeticError):
    """A numerical procedure failed or became degenerate."""


class QuadratureCollapseError(NumericError):
    """The quadrature estimate of the evidence became non-positive."""


class FiniteEscapeError(NumericError):
    """An ODE trajectory or closed-form branch blew up inside the interval."""

    def __init__(self, message, alpha=None):
        super().__init__(message)
        self.alpha = alpha


class DegenerateDensityError(NumericError):
    """A gridded density has zero (or non-finite) mass."""
