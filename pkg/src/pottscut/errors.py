"""Exception types shared across the package."""


class PottsCutError(Exception):
    """Base class for all package errors."""


class NonSymmetric(PottsCutError, ValueError):
    pass


class BadBoundaries(PottsCutError, ValueError):
    pass


class WrongVariant(PottsCutError, TypeError):
    pass


class QuadratureFailure(PottsCutError, ArithmeticError):
    pass


class LengthMismatch(PottsCutError, ValueError):
    pass


class BudgetExceeded(PottsCutError, RuntimeError):
    pass


class EmptyConstraintSet(PottsCutError, ValueError):
    pass


class DegenerateCovariance(PottsCutError, ArithmeticError):
    """An increment covariance has an eigenvalue below the clipping tolerance."""


class NonMonotoneQ(PottsCutError, ValueError):
    pass


class OptimizerStall(PottsCutError, RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NonMonotoneSequence(PottsCutError, RuntimeError):
    pass


class NotPSD(PottsCutError, ValueError):
    pass


class ConfigInvalid(PottsCutError, ValueError):
    pass


class TaskFailed(PottsCutError, RuntimeError):
    pass


class SuiteUnknown(PottsCutError, KeyError):
    pass
