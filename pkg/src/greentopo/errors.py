"""Exception hierarchy shared by every module in the package."""


class GreenTopoError(Exception):
    """Base class for all package errors."""


class DomainError(GreenTopoError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class ValidationError(DomainError):
    """User-supplied configuration failed validation before any computation."""


class InfeasibleError(GreenTopoError):
    """A design problem has no feasible point under the stated assumptions.

    ``assumption`` names the violated condition in plain text, e.g.
    ``"eta < 1/(1+phi)"``. ``achieved`` carries the best value that was
    reachable (a coverage probability, typically) when one is known.
    """

    def __init__(self, message, assumption=None, achieved=None):
        super().__init__(message)
        self.assumption = assumption
        self.achieved = achieved


class QuadratureError(GreenTopoError, ArithmeticError):
    """Adaptive quadrature failed to reach the requested accuracy."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(GreenTopoError, ArithmeticError):
    """A bisection or bracketing search hit its iteration cap."""
