"""Exception types shared across the package."""


class AdaflightError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(AdaflightError, ValueError):
    """An argument violates a documented precondition."""


class InvalidSpecError(AdaflightError, ValueError):
    """A layer stack or config does not compose into a valid model."""


class DegenerateSampleError(AdaflightError, ValueError):
    """All pooled samples are identical; no bandwidth can be derived."""


class InsufficientSamplesError(AdaflightError, ValueError):
    """An estimator needs more samples per set than were provided."""


class InfeasibleDensityError(AdaflightError, RuntimeError):
    """Tree placement could not satisfy the separation constraint."""


class DivergedTrainingError(AdaflightError, RuntimeError):
    """A training step produced a non-finite gradient or parameter."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite gradient at step {step}")
