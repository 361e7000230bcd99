"""Exceptions raised by the random-sum computations.

Input problems derive from ``ValueError`` and numerical failures at run time
derive from ``RuntimeError``, so callers can keep catching the builtin types.
"""


class RandomSumError(Exception):
    """Base class for every error raised by this package."""


class DegenerateLawError(RandomSumError, ValueError):
    """The stopping probability q is 0 or 1 within tolerance."""


class NonfiniteMomentError(RandomSumError, ValueError):
    """A requested moment does not exist (open-tailed tabulated law)."""


class NegativeVarianceError(RandomSumError, ValueError):
    """Step moments are inconsistent: the random-sum variance came out negative."""


class AtomAtZeroError(RandomSumError, ValueError):
    """The non-stopping kernel carries all of its mass at zero."""


class GridTooCoarseError(RandomSumError, RuntimeError):
    """The solved survival curve is not monotone on the requested grid."""


class InversionUnstableError(RandomSumError, RuntimeError):
    """Laplace inversion results disagree between Stehfest orders."""


class RunawayStopError(RandomSumError, RuntimeError):
    """A simulated replication never reached its stopping step."""


class StabilityViolationError(RandomSumError, ValueError):
    """Traffic intensity rho >= 1, so stationary characteristics do not exist."""


class ShapeMismatchError(RandomSumError, ValueError):
    """Two curves being compared live on incompatible grids."""
