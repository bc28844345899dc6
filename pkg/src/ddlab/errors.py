"""Exception hierarchy.

Validation problems raise :class:`ValidationError` (a ``ValueError``); every
numerical failure derives from :class:`NumericalError` so callers (and the
CLI) can tell the two apart.
"""


class DdlabError(Exception):
    """Base class for all package errors."""


class ValidationError(DdlabError, ValueError):
    """Inputs violate a documented precondition."""


class NumericalError(DdlabError, ArithmeticError):
    """A numerical procedure failed its own convergence or sanity checks."""


class NonFiniteCoefficient(NumericalError):
    pass


class SolveDiverged(NumericalError):
    pass


class QuadratureFailed(NumericalError):
    pass


class NegativeIntegrand(NumericalError):
    pass


class TruncationNotConverged(NumericalError):
    pass


class SeriesDiverged(NumericalError):
    pass


class EvaluatorFailed(NumericalError):
    pass


class StateLeftInterval(NumericalError):
    pass


class DensityNotNormalized(ValidationError):
    pass


class NotSupported(ValidationError):
    pass
