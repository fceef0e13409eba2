class ValidationError(ValueError):
    """Raised when an input violates an operation's preconditions."""


class TrainingError(RuntimeError):
    """Raised when a training run cannot continue (missing data, non-finite loss)."""
