class USSegError(Exception):
    """Base class for every error raised by the package."""


class ArgumentError(USSegError, ValueError):
    """An operation was called with an argument outside its domain."""


class ConfigError(USSegError):
    """A configuration document is invalid. `key` holds the dotted key path."""

    def __init__(self, message: str, key: str = ""):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class VolumeFormatError(USSegError):
    """A USV file is malformed. `field` names the offending header field."""

    def __init__(self, message: str, field: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ModelFormatError(USSegError):
    pass


class InvariantError(USSegError, ValueError):
    """A domain object would violate one of its invariants."""


class WeibullDomainError(ArgumentError):
    pass


class TrainingError(USSegError):
    pass


class InferenceError(USSegError):
    pass


class EvaluationError(USSegError):
    pass
