"""Exception hierarchy for the signgan pipeline."""


class SignGanError(Exception):
    """Base class for every error raised by this package."""


class InvalidLabel(SignGanError, ValueError):
    pass


class RangeError(SignGanError, ValueError):
    pass


class ShapeError(SignGanError, ValueError):
    pass


class FormatError(SignGanError, ValueError):
    pass


class NoPersonDetected(SignGanError):
    pass


class ValidationError(SignGanError, ValueError):
    pass


class SpecError(SignGanError, ValueError):
    pass


class WindowError(SignGanError, ValueError):
    pass


class EmptyEvaluation(SignGanError):
    pass


class EmptySequence(SignGanError):
    pass


class EmptyDataset(SignGanError):
    pass


class NonFiniteLoss(SignGanError, FloatingPointError):
    """A loss term became NaN or infinite; ``term`` names the offender."""

    def __init__(self, term: str, value: float):
        super().__init__(f"non-finite loss in term {term!r}: {value}")
        self.term = term
        self.value = value


class ConfigMismatch(SignGanError):
    """A checkpoint was built from a different configuration."""

    def __init__(self, field: str, expected, found):
        super().__init__(f"config field {field!r} mismatch: expected {expected!r}, checkpoint has {found!r}")
        self.field = field
        self.expected = expected
        self.found = found


class ConfigError(SignGanError, ValueError):
    """Invalid configuration value; ``field`` is the dotted path of the offender."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
