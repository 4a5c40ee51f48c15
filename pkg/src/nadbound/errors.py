"""Exception hierarchy shared across the package."""


class NadboundError(Exception):
    """Base class for all package errors."""


class NotHermitianError(NadboundError, ValueError):
    pass


class NonFiniteError(NadboundError, ValueError):
    pass


class GapClosureError(NadboundError):
    """Two distinct levels came closer than the degeneracy tolerance.

    ``time`` carries the time of failure when known.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class LevelCrossingError(GapClosureError):
    """Energy ordering of tracked levels changed between neighbouring grid points."""


class InvalidStateError(NadboundError, ValueError):
    pass


class ConfigError(NadboundError, ValueError):
    """Bad run configuration. ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class CertificationError(NadboundError):
    """A measured rate violated its bound by more than the numerical slack."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
