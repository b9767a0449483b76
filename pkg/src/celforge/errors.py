"""Exception types raised across the package."""


class CelforgeError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CelforgeError, ValueError):
    """Input array has the wrong shape, channel count or values."""


class InvalidParameterError(CelforgeError, ValueError):
    """A scalar parameter is outside its legal range."""


class EmptySketchError(CelforgeError):
    """A binary sketch has no line pixels where at least one is required."""


class NoValidPixelsError(CelforgeError):
    """The restricted pixel set for a triplet is empty."""


class FitError(CelforgeError):
    """Duplicate-detector regression could not be fitted."""


class FormatError(CelforgeError):
    """A file does not follow its expected binary or text layout."""
