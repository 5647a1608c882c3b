"""Exception types raised by the library.

Every domain failure derives from :class:`SantaloError`, which itself is a
``ValueError`` so callers that only care about "bad input" can catch that.
"""


class SantaloError(ValueError):
    """Base class for domain errors (bad bodies, weights, fields...)."""


class DegenerateBodyError(SantaloError):
    pass


class CenterNotInteriorError(SantaloError):
    pass


class EmptyDomainError(SantaloError):
    pass


class NotLogConcaveError(SantaloError):
    pass


class NotNonIncreasingError(SantaloError):
    pass


class NotIntegrableError(SantaloError):
    pass


class HypothesisViolatedError(SantaloError):
    pass


class PreconditionError(SantaloError):
    pass


class OutOfRangeError(SantaloError):
    pass


class ConvergenceError(SantaloError):
    """Raised when an iteration cap is hit; ``best`` holds the best iterate."""

    def __init__(self, message, best=None, value=None):
        super().__init__(message)
        self.best = best
        self.value = value
