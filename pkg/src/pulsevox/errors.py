"""Exception types shared across the package."""


class PulsevoxError(Exception):
    """Base class for all package errors."""


class InvalidInput(PulsevoxError, ValueError):
    """An operation received data violating its preconditions."""


class ConfigError(PulsevoxError, ValueError):
    """A configuration value is out of range or inconsistent."""


class CheckpointError(PulsevoxError, RuntimeError):
    """A checkpoint is missing, corrupt, or incompatible."""


class TrainingDiverged(PulsevoxError, RuntimeError):
    """A loss became non-finite; the offending batch was dumped for inspection."""
