"""Exception hierarchy shared by every module."""


class BVLabError(Exception):
    """Base class for all errors raised by bvlab."""


class InvalidArgument(BVLabError, ValueError):
    pass


class ResolutionInsufficient(BVLabError):
    """The grid is too coarse for the requested scale."""


class BoundaryContact(InvalidArgument):
    """A window or ball comes too close to the outer edge of the grid."""


class Infeasible(BVLabError):
    pass


class Unsupported(BVLabError):
    pass


class PreconditionError(BVLabError):
    """A mathematical hypothesis of a check does not hold for the input."""
