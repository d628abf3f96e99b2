"""Exception hierarchy.

Validation problems (bad shapes, bad arguments) derive from ``ValueError``;
numerical failures derive from ``ArithmeticError``. The CLI maps the two
families onto different exit codes.
"""


class SpdAlignError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SpdAlignError, ValueError):
    """Invalid argument: wrong shape, wrong type, out-of-range value."""


class DimensionError(ValidationError):
    """Shapes of the arguments do not agree."""


class InsufficientSamplesError(ValidationError):
    """Fewer rows than needed to estimate a covariance."""


class NumericalError(SpdAlignError, ArithmeticError):
    """A numerical routine failed or produced a non-finite result."""


class NotPositiveDefiniteError(NumericalError):
    """Matrix is not symmetric positive definite."""
