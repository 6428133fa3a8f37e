"""Exception hierarchy shared by every module.

The CLI maps the three families onto exit codes: usage errors (2),
resource-bound violations (3) and numerical failures (4).
"""


class GlassAnnealError(Exception):
    """Base class for all package errors."""


class UsageError(GlassAnnealError, ValueError):
    """Invalid input or configuration."""


class InvalidMixtureError(UsageError):
    pass


class InvalidCovarianceError(UsageError):
    pass


class DegenerateConstantsError(UsageError):
    pass


class OutOfSupportError(UsageError):
    """Mean eigenvalue outside the semicircle support."""


class OutOfBandError(UsageError):
    """Energy outside the band where an index relation is defined."""


class DimensionMismatchError(UsageError):
    pass


class ResourceBoundError(GlassAnnealError):
    """A configured size or memory bound would be exceeded."""

    def __init__(self, message: str, bound: str):
        super().__init__(message)
        self.bound = bound


class NumericalError(GlassAnnealError):
    pass


class DivergedError(NumericalError):
    """Raised when an iteration leaves the finite regime.

    ``records`` holds whatever was logged before the failure.
    """

    def __init__(self, message: str, records=None):
        super().__init__(message)
        self.records = list(records) if records is not None else []


class NonpositiveLossError(NumericalError):
    """Loss-ratio annealing received a loss that is not strictly positive."""

    def __init__(self, message: str, records=None):
        super().__init__(message)
        self.records = list(records) if records is not None else []
