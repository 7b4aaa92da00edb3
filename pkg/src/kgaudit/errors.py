"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage problems exit 1,
data problems exit 2, numerical failures exit 3.
"""


class KgauditError(Exception):
    """Base class for package errors."""


class ShapeError(KgauditError):
    """Operands do not conform to an operation's signature."""


class NumericalError(KgauditError):
    """A computation produced or would produce non-finite values."""


class DataError(KgauditError):
    """Malformed or inconsistent input data."""


class ConfigError(KgauditError):
    """Invalid run configuration."""
