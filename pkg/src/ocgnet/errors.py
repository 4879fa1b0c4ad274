"""Exception types shared across the package."""


class OcgnetError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(OcgnetError, ValueError):
    """An argument violates an operation's preconditions."""


class InvalidConfigError(OcgnetError, ValueError):
    """A configuration object violates its invariants."""


class ShapeError(OcgnetError, ValueError):
    """Tensor shapes are inconsistent with each other or with the config."""


class AnnotationError(OcgnetError, ValueError):
    """A ground-truth annotation is degenerate or out of bounds."""


class CheckpointError(OcgnetError, RuntimeError):
    """A checkpoint is unreadable or incompatible with the current config."""
