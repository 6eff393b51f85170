"""Exception types shared across the package."""


class StressLabError(Exception):
    """Base class for all stresslab errors."""


class ValidationError(StressLabError, ValueError):
    """Raised for invalid data, configuration, or arguments.

    The CLI maps these to exit code 2 (data/validation error).
    """


class ExperimentError(StressLabError, RuntimeError):
    """Raised when an experiment cell fails; message carries (model, seed)."""
