"""Exception hierarchy shared by all modules."""


class VPerturbError(Exception):
    """Base class for every error raised by :mod:`vperturb`."""


class RankDeficient(VPerturbError, ValueError):
    """A triangular factor has a (numerically) zero diagonal entry."""


class Singular(VPerturbError, ValueError):
    """A Gram-matrix solve hit a pivot below the singularity threshold."""


class ConvergenceFailure(VPerturbError, RuntimeError):
    pass


class DegenerateChannel(VPerturbError, ValueError):
    pass


class LengthMismatch(VPerturbError, ValueError):
    pass


class SearchSpaceTooLarge(VPerturbError, ValueError):
    pass


class CountersDisabled(VPerturbError, RuntimeError):
    pass


class InapplicableExpansion(VPerturbError, ValueError):
    """The Neumann series of ``(H + B)^-1`` does not converge."""


class ConfigInvalid(VPerturbError, ValueError):
    pass


class Overflow(VPerturbError, OverflowError):
    pass
