class LabelflipError(Exception):
    """Base class for errors raised by this package."""


class DataError(LabelflipError, ValueError):
    """Malformed, missing or incompatible input data."""


class ConfigError(LabelflipError, ValueError):
    """A parameter violates its documented range."""


class InvariantError(LabelflipError, RuntimeError):
    """An internal consistency check failed."""
