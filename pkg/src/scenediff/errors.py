"""Exception hierarchy shared by all scenediff modules."""


class ScenediffError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ScenediffError, ValueError):
    """A configuration value is missing, unknown, or out of its legal range."""


class ValidationError(ScenediffError, ValueError):
    """Input data (annotations, manifests, images, arguments) failed validation."""


class DimensionError(ScenediffError, ValueError):
    """Array shapes are inconsistent with each other or with the model config."""


class StateError(ScenediffError, RuntimeError):
    """An operation was called on an object in the wrong state."""


class NumericalError(ScenediffError, ArithmeticError):
    """A numerical routine left its supported regime (non-finite values, failed decomposition)."""


class TrainingDiverged(ScenediffError, RuntimeError):
    """Training produced a non-finite loss and was aborted."""
