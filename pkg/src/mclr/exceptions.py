"""Exception hierarchy shared by all modules."""


class MCLRError(Exception):
    """Base class for errors raised by this package."""


class PreconditionError(MCLRError, ValueError):
    """Inputs violate a documented precondition (dimensions, ranges)."""


class RankDeficient(PreconditionError):
    """A design matrix does not have full column rank."""


class NotPositiveDefinite(MCLRError, ValueError):
    """A matrix that must be positive definite is not."""


class NonPositiveLeadingCoefficient(MCLRError, ValueError):
    pass


class InvalidDf(PreconditionError):
    pass


class InvalidDim(PreconditionError):
    pass


class InvalidDesign(PreconditionError):
    pass
