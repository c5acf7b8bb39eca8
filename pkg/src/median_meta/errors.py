"""Exception hierarchy shared by all modules."""


class MedianMetaError(Exception):
    """Base class for every error raised by this package."""


class AmbiguousSummary(MedianMetaError):
    pass


class InvalidSummary(MedianMetaError, ValueError):
    pass


class ParseError(MedianMetaError, ValueError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class MissingQuartiles(MedianMetaError, ValueError):
    pass


class ZeroIQR(MedianMetaError, ValueError):
    pass


class InvalidParams(MedianMetaError, ValueError):
    pass


class DomainError(MedianMetaError, ValueError):
    pass


class WrongScenario(MedianMetaError, ValueError):
    pass


class TooFewStudies(MedianMetaError, ValueError):
    pass


class NoConvergence(MedianMetaError, RuntimeError):
    pass


class NonPositiveSupport(MedianMetaError, ValueError):
    pass


class ZeroDensity(MedianMetaError, ValueError):
    pass


class EmptyInput(MedianMetaError, ValueError):
    pass


class NonPositiveVariance(MedianMetaError, ValueError):
    pass


class NoAcceptedDraws(MedianMetaError, RuntimeError):
    pass


class SampleSizeError(MedianMetaError, ValueError):
    """Raised by the Shapiro-Wilk test outside 3 <= n <= 5000."""
