"""Exception types shared across the package."""


class TimepredError(Exception):
    """Base class for all errors raised by this package."""


class InvalidRangeError(TimepredError, ValueError):
    """Segment bounds are empty, reversed, or too short for the cost."""


class InfeasibleSegmentationError(TimepredError, ValueError):
    """No segmentation satisfies the breakpoint count / minimum-size constraints."""


class ConfigError(TimepredError, ValueError):
    """A configuration value is outside its legal range."""


class ShapeMismatchError(TimepredError, ValueError):
    """Input dimensions disagree with what a model or operation expects."""


class FormatError(TimepredError, ValueError):
    """An on-disk file does not conform to its declared format."""


class TrainingDivergedError(TimepredError, RuntimeError):
    """Training loss became non-finite."""
