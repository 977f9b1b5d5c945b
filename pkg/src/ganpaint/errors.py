"""Exception hierarchy shared across the package."""


class GanpaintError(Exception):
    """Base class for all package errors."""


class DimensionError(GanpaintError):
    """Shape / latent-length / resolution mismatch."""


class SpecError(GanpaintError):
    """Invalid mask or corruption specification."""


class DataError(GanpaintError):
    """Empty or unusable dataset."""


class CheckpointError(GanpaintError):
    """Corrupt or inconsistent checkpoint on disk."""


class TrainingFailure(GanpaintError):
    """Training loss became non-finite."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class OptimizationError(GanpaintError):
    """Latent optimization hit a non-finite loss; carries the trace so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class InterfaceError(GanpaintError):
    """A pluggable component (e.g. an embedder) violated its contract."""
