"""Exceptions raised by orlicz-lab."""


class OrliczError(Exception):
    """Base class for all library errors."""


class ParseError(OrliczError, ValueError):
    """A Young function spec does not follow the grammar."""


class NotYoung(OrliczError, ValueError):
    """A parsed function fails the positivity or convexity audit."""

    def __init__(self, message: str, witness: tuple = None):
        super().__init__(message)
        self.witness = witness


class DomainError(OrliczError, ValueError):
    """An operation was called outside its domain."""


class QuadratureFailure(OrliczError, ArithmeticError):
    """Panel refinement did not converge."""

    def __init__(self, message: str, estimates: tuple = None):
        super().__init__(message)
        self.estimates = estimates


class BracketFailure(OrliczError, ArithmeticError):
    """No lambda bracket was found for the requested mean."""


class NoCramer(OrliczError, ArithmeticError):
    """The characteristic function reaches modulus 1 on the scanned grid."""


class GridTooCoarse(OrliczError, ArithmeticError):
    """Step halving changed the convolution result too much."""

    def __init__(self, message: str, estimates: tuple = None):
        super().__init__(message)
        self.estimates = estimates


class AllRejected(OrliczError, RuntimeError):
    """Too few Monte Carlo samples landed in the ball."""


class BudgetExceeded(OrliczError, RuntimeError):
    """The rejection sampler used more proposals than its budget allows."""


class ValidityFloor(OrliczError, ValueError):
    """The dimension is below the threshold where the expansion is quantified."""


class NotNormalized(OrliczError, ValueError):
    """exp(-V) is not a probability density."""


class Psi2Violated(OrliczError, ValueError):
    """t -> Psi(sqrt(t)) is not convex (or Psi is not even)."""


class BoundViolation(OrliczError, ArithmeticError):
    """A proven inequality failed numerically."""
