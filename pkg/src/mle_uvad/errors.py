"""Exception types shared across the package.

Plain ``ValueError`` is used for bad arguments and shape/config violations;
the classes below mark failures that callers (notably the CLI) need to
distinguish from argument errors.
"""


class DataFormatError(Exception):
    """A data or model file is malformed, truncated, or fails validation."""


class NumericalError(Exception):
    """A non-finite quantity appeared where a finite one is required."""
