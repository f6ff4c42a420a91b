"""Exception types shared across the package."""


class OptbenchError(Exception):
    """Base class for all errors raised by optbench."""


class ValidationError(OptbenchError, ValueError):
    """Invalid argument, plan, or input data."""


class PlanValidationError(ValidationError):
    """An experiment plan violates its invariants."""


class DataIntegrityError(OptbenchError, ValueError):
    """Recorded data contradicts a mathematical invariant.

    Raised e.g. when a run claims a value better than the known optimum or a
    profile curve leaves [0, 1]. Never repaired silently.
    """


class NotFoundError(OptbenchError, LookupError):
    """A registry lookup (suite, problem, solver) failed."""
