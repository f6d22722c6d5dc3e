"""Exception types shared across the workbench."""


class InvalidInputError(ValueError):
    """Malformed or empty input data."""


class DegenerateDataError(ValueError):
    """Input is structurally valid but unusable (e.g. a map nothing can walk on)."""


class ShapeError(ValueError):
    """Tensor shapes incompatible for an operation."""

    def __init__(self, op, *shapes):
        super().__init__(f"{op}: incompatible shapes {' vs '.join(str(s) for s in shapes)}")
        self.op = op
        self.shapes = shapes


class ConfigError(ValueError):
    """Inconsistent configuration values."""


class WindowError(ValueError):
    """Sequence window does not satisfy the model's length constraints."""


class OptimizationFailure(RuntimeError):
    """Nonlinear optimization hit non-finite values; carries the last finite iterate."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class TrainingDiverged(RuntimeError):
    """Training loss became non-finite; carries the last good parameter snapshot."""

    def __init__(self, message, checkpoint=None, history=None):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.history = history


class AlignmentError(ValueError):
    """Prediction and ground truth share no evaluable frames."""
