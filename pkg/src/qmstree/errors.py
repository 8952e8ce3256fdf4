"""Exception types raised across the package."""


class QMSError(Exception):
    """Base class for all package errors."""


class NotInRegion(QMSError, KeyError):
    pass


class OverlappingSupport(QMSError, ValueError):
    pass


class KeepNotSubset(QMSError, ValueError):
    pass


class NotHermitian(QMSError, ValueError):
    pass


class NonPositiveSpectrum(QMSError, ValueError):
    pass


class InvalidDensity(QMSError, ValueError):
    pass


class NotNormalized(QMSError, ValueError):
    pass


class RegionTooLarge(QMSError, ValueError):
    """No evaluation path can handle the requested region size."""


class NoConvergence(QMSError, RuntimeError):
    pass


class LostPositivity(QMSError, RuntimeError):
    pass


class HypothesisViolated(QMSError, ValueError):
    """A formula's precondition (e.g. commutation) was checked and fails."""


class StrategyInapplicable(QMSError, ValueError):
    pass


class BranchNotFound(QMSError, RuntimeError):
    pass


class InvalidChildIndex(QMSError, IndexError):
    pass


class NotCentral(QMSError, ValueError):
    pass
