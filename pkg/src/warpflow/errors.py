"""Exception types shared across the package."""


class WarpflowError(Exception):
    """Base class for all package errors."""


class ConfigError(WarpflowError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class DataError(WarpflowError):
    """Data inconsistent with its declared structure (bad parity, shapes, payloads)."""


class NumericError(WarpflowError):
    """Numerical failure during a computation (CLI exit code 3)."""


class InvariantViolation(WarpflowError):
    """A monitored runtime invariant was breached beyond tolerance (CLI exit code 4)."""
