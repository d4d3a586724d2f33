"""Exception types raised across the package."""


class SoftLabelError(Exception):
    """Base class for package errors."""


class DimensionError(SoftLabelError, ValueError):
    """Shapes or class counts of paired inputs disagree."""


class KernelError(SoftLabelError, ValueError):
    """A kernel specification is unusable for the requested operation."""


class FormatError(SoftLabelError, ValueError):
    """A serialized container is malformed (magic, version, CRC, truncation)."""


class ValidationError(SoftLabelError, ValueError):
    """Decoded data violates a SoftLabelMap invariant.

    ``pixel`` holds the offending ``(row, col)`` when known.
    """

    def __init__(self, message, pixel=None):
        if pixel is not None:
            message = f"{message} at pixel (row={pixel[0]}, col={pixel[1]})"
        super().__init__(message)
        self.pixel = pixel


class ConfigError(SoftLabelError, ValueError):
    """Invalid run or augmentation configuration."""
