"""Exception hierarchy shared by every module."""


class WarpError(Exception):
    """Base class for all package errors."""


class GridTooCoarse(WarpError, ValueError):
    pass


class DomainInvalid(WarpError, ValueError):
    pass


class GridMismatch(WarpError, ValueError):
    pass


class SingularOrigin(WarpError, ValueError):
    pass


class NonPositiveInput(WarpError, ValueError):
    pass


class ParamOutOfRange(WarpError, ValueError):
    pass


class MissingM(WarpError, ValueError):
    pass


class NoConvergence(WarpError, RuntimeError):
    pass


class PositivityLost(WarpError, RuntimeError):
    """The warping profile reached zero.

    ``radius`` is the first radius at which ``v <= 0`` was detected; ``trace``
    optionally carries the partial trajectory up to that point.
    """

    def __init__(self, message, radius=None, trace=None):
        super().__init__(message)
        self.radius = radius
        self.trace = trace


class NotASolution(WarpError, ValueError):
    pass


class UnsupportedFamily(WarpError, ValueError):
    pass


class EmptyAdmissibleSet(WarpError, ValueError):
    pass


class PreconditionError(WarpError, ValueError):
    pass


class ConfigError(WarpError, ValueError):
    """Config failed validation; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
