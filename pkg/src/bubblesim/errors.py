"""Exception types shared across the package."""


class BubblesimError(Exception):
    """Base class for package errors."""


class ConfigError(BubblesimError):
    """Invalid configuration value, file, or combination."""


class ExhaustionError(BubblesimError):
    """A user or topic ran out of candidate articles."""


class TrainingError(BubblesimError):
    """Model training failed (empty log, non-finite embeddings)."""
