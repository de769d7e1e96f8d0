"""Exception types shared across the package."""


class SplkError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(SplkError, ValueError):
    """Malformed or inconsistent caller input (shapes, ranges, empty sets)."""


class FactorizationError(SplkError):
    """A matrix factorization failed even after jitter escalation."""


class NumericalError(SplkError):
    """A computation produced non-finite or otherwise unusable values.

    Carries the offending parameter vector in ``params`` when available.
    """

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


class PartitionError(SplkError):
    """Domain decomposition could not be carried out as requested."""
