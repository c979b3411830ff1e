"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters for a topology, model or experiment."""


class ModelError(RuntimeError):
    """A numerical model cannot be evaluated (singular system, bad file)."""


class TrainingError(RuntimeError):
    """Training diverged; ``diagnostics`` holds the last observed values."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class HorizonRangeError(ValueError):
    """Prediction horizon outside the range the model was trained on."""


class ProtocolViolation(AssertionError):
    """A simulated hardware protocol rule was broken (e.g. sending without the token)."""
