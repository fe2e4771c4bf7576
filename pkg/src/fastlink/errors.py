"""Exception types shared across the package."""


class FastLinkError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FastLinkError, ValueError):
    """Invalid parameters or inconsistent configuration."""


class NumericalError(FastLinkError, ArithmeticError):
    """A numerical routine failed (singular system, NaN loss, ...)."""


class IntegrityError(FastLinkError, ValueError):
    """Side information or a serialized payload is corrupt."""


class ParseError(FastLinkError, ValueError):
    """Malformed input file. ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
