"""Exception hierarchy shared by every emofusion module."""


class EmoFusionError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(EmoFusionError, ValueError):
    pass


class ConfigError(EmoFusionError, ValueError):
    pass


class NumericError(EmoFusionError, ArithmeticError):
    pass


class StateError(EmoFusionError, RuntimeError):
    pass


class UsageError(EmoFusionError, RuntimeError):
    pass


class FormatError(EmoFusionError, ValueError):
    """A file exists but its contents are not in a supported format."""


class GeometryError(EmoFusionError, ValueError):
    """A face box does not fit inside its frame."""


class ModeMismatchError(EmoFusionError, ValueError):
    """Inputs do not match the modality the model was built for."""
