"""Exception taxonomy shared across the stack.

The CLI maps these onto exit codes: usage errors -> 1,
DataValidationError -> 2, NumericsError -> 3.
"""


class TacstackError(Exception):
    """Base class for all package errors."""


class NumericsError(TacstackError):
    """Non-finite values, shape mismatches, or divergence in numeric code."""


class DataValidationError(TacstackError):
    """Rejected trajectories, sync residual violations, corrupt datasets."""


class ConfigError(TacstackError):
    """Malformed or inconsistent configuration."""


class SimError(TacstackError):
    """Simulator contract violations (non-finite actions, frustum exits)."""
