"""Exception hierarchy shared by every module of the package."""


class LogObsError(Exception):
    """Base class for all package errors."""


class OutOfDomain(LogObsError, ValueError):
    pass


class GridTooSmall(LogObsError, ValueError):
    pass


class BallOutsideDomain(LogObsError, ValueError):
    pass


class NegativeInput(LogObsError, ValueError):
    pass


class RadiusOutOfRange(LogObsError, ValueError):
    pass


class BoundaryMismatch(LogObsError, ValueError):
    pass


class NegativeField(LogObsError, ValueError):
    pass


class NumericFailure(LogObsError, RuntimeError):
    """Raised when an iterative or integration scheme fails."""


class NonConvergence(NumericFailure):
    pass


class DivergingEnergy(NumericFailure):
    pass


class EmptyFreeBoundary(LogObsError, ValueError):
    pass


class NotAFreeBoundaryPoint(LogObsError, ValueError):
    pass


class TooFewPoints(LogObsError, ValueError):
    pass


class DomainTooSmall(LogObsError, ValueError):
    pass


class NonPositiveEnergyGap(NumericFailure):
    pass


class SeedTooLarge(NumericFailure):
    pass


class BlowThrough(NumericFailure):
    pass


class ConfigError(LogObsError, ValueError):
    pass


class MissingInput(LogObsError, FileNotFoundError):
    pass
