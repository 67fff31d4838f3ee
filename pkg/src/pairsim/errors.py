"""Exception hierarchy.

Validation errors map to CLI exit code 2, numerical failures to exit code 3.
"""


class PairsimError(Exception):
    """Base class for all package errors."""


class ValidationError(PairsimError, ValueError):
    """Inputs violate a documented precondition."""


class NumericalError(PairsimError, ArithmeticError):
    """A numerical routine failed to deliver its guarantee."""


class DimensionMismatch(ValidationError):
    pass


class InvalidProbability(ValidationError):
    pass


class DegenerateRate(ValidationError):
    pass


class InvalidPopulation(ValidationError):
    pass


class InvalidState(ValidationError):
    pass


class SymmetryViolation(ValidationError):
    pass


class NotTwoByTwo(ValidationError):
    pass


class NotFineBalance(ValidationError):
    pass


class FineBalanceExcluded(ValidationError):
    pass


class RoundingInfeasible(ValidationError):
    pass


class StateSpaceTooLarge(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class SingularState(ValidationError):
    pass


class Absorbed(ValidationError):
    pass


class SingularZ(ValidationError):
    pass


class InvalidSimplexPoint(ValidationError):
    pass


class MissingFluidSolution(ValidationError):
    pass


class ToleranceNotMet(NumericalError):
    pass


class BoundViolation(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass
