"""Exception hierarchy shared by all fairbell modules."""


class FairbellError(Exception):
    """Base class for every error raised by this package."""


class InvalidOperatorError(FairbellError, ValueError):
    """An operator or state failed a structural check (Hermiticity, PSD, trace)."""


class DimensionMismatchError(FairbellError, ValueError):
    pass


class NumericalError(FairbellError, ArithmeticError):
    """A decomposition or iteration did not converge."""


class SingularOperatorError(FairbellError, ArithmeticError):
    """An operator has an eigenvalue below the singularity floor."""


class CompleteLossError(FairbellError, ArithmeticError):
    """A success probability vanished, leaving postselected quantities undefined."""


class NotFactorizableError(FairbellError, ValueError):
    pass


class NotFairError(FairbellError, ValueError):
    pass


class ProportionalError(FairbellError, ValueError):
    """Two operators are proportional, so no witness pair exists."""


class ConditionHoldsError(FairbellError, ValueError):
    """The fairness condition holds, so no violating construction exists."""


class OutOfDomainError(FairbellError, ValueError):
    pass


class ZeroOperatorError(FairbellError, ValueError):
    pass


class EmptyCellError(FairbellError, ValueError):
    """An event-log cell has no trials (or no successes where they are needed)."""
