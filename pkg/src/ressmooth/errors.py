"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands or buffers have incompatible dimensions."""


class ConfigError(ValueError):
    """A parameter or configuration value is outside its legal range."""


class InputError(ValueError):
    """A runtime input is unusable (non-finite, empty, out of range)."""


class FormatError(ValueError):
    """A binary file does not follow its documented layout."""


class TrainingError(RuntimeError):
    """Training aborted, e.g. the loss became non-finite."""
