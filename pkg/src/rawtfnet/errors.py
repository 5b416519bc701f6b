"""Exception hierarchy shared by every rawtfnet module."""


class RawTFNetError(Exception):
    """Base class for all package errors."""


class ConfigError(RawTFNetError, ValueError):
    """An invalid hyperparameter or configuration value."""


class DimensionError(RawTFNetError, ValueError):
    """Incompatible tensor shapes or axes."""


class NumericError(RawTFNetError, ArithmeticError):
    """A NaN or infinity appeared where finite values are required."""


class StateError(RawTFNetError, RuntimeError):
    """An operation was called in the wrong lifecycle state."""


class DataError(RawTFNetError, ValueError):
    """Empty or malformed data handed to a data or metric routine."""


class ParseError(RawTFNetError, ValueError):
    """A text or binary file could not be parsed."""


class WavFormatError(ParseError):
    """A WAV file parsed but has an unsupported format field."""

    def __init__(self, field, expected, found):
        self.field = field
        super().__init__(f"unsupported WAV {field}: expected {expected}, found {found}")
