"""Exception and warning classes raised by warpfit."""


class WarpfitError(ValueError):
    """Base class for all data and argument errors raised by warpfit."""


class EmptySample(WarpfitError):
    pass


class NonFiniteValue(WarpfitError):
    pass


class OutOfRange(WarpfitError):
    pass


class InvalidOrder(WarpfitError):
    """Raised when a Wasserstein order ``r < 1`` is requested."""


class EmptyCollection(WarpfitError):
    pass


class InstanceTooLarge(WarpfitError):
    """The brute-force coupling oracle refuses instances above its size cap."""


class ParamOutOfBox(WarpfitError):
    pass


class DegenerateDenominator(WarpfitError):
    pass


class EmptyStats(WarpfitError):
    pass


class SingularSigma(WarpfitError):
    pass


class QuadratureDivergence(WarpfitError):
    pass


class InvalidSpec(WarpfitError):
    pass


class NoConvergenceWarning(UserWarning):
    """The optimizer exhausted its budget before meeting its tolerances.

    The best point found is still returned; the result carries
    ``converged=False``.
    """
