"""Exception hierarchy shared by all pipeline modules.

Two broad families matter to callers: parameter problems (the request itself
was malformed) and data problems (the inputs were readable but invalid).  The
CLI maps the former to exit code 1 and the latter to exit code 2.
"""


class PelletVisionError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(PelletVisionError):
    """A parameter is outside its documented domain (usage error)."""


class EmptyInputError(PelletVisionError):
    """An operation received an empty mask, point set, or sample."""


class ShapeMismatchError(PelletVisionError):
    """Two grids that must share dimensions do not."""


class CoverageError(PelletVisionError):
    """A tile layout leaves at least one image pixel uncovered."""


class FormatError(PelletVisionError):
    """A file does not match its documented on-disk format."""
