# Description: Exception hierarchy shared by every package in the project.


class MavtError(Exception):
    """Base class for all errors raised by this project."""


class DimensionError(MavtError, ValueError):
    """Raised when tensor shapes do not agree for an operation."""


class ConfigError(MavtError, ValueError):
    """Raised for invalid or unknown configuration values."""


class ContractError(MavtError, RuntimeError):
    """Raised when a caller violates an operation's precondition."""


class FormatError(MavtError, ValueError):
    """Raised when an on-disk record is malformed."""


class GenerationError(MavtError, ValueError):
    """Raised when a synthetic dataset cannot satisfy its invariants."""


class SamplingError(MavtError, ValueError):
    """Raised when mismatch pairs cannot be drawn from a batch."""


class NonFiniteLossError(MavtError, ArithmeticError):
    """Raised when a training step produces a non-finite loss."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
