"""Exception hierarchy shared by all boxte modules."""


class BoxTEError(Exception):
    """Base class for every error raised by boxte."""


class ParseError(BoxTEError):
    def __init__(self, message: str, lineno: int | None = None):
        super().__init__(message)
        self.lineno = lineno


class VocabularyError(BoxTEError):
    pass


class RangeError(BoxTEError):
    pass


class SpecError(BoxTEError):
    pass


class ConfigError(BoxTEError):
    pass


class NumericError(BoxTEError):
    pass


class ShapeError(BoxTEError):
    pass


class SamplingError(BoxTEError):
    pass


class EvaluationError(BoxTEError):
    pass


class ConstructionError(BoxTEError):
    pass


class BudgetError(BoxTEError):
    pass


class CheckpointError(BoxTEError):
    pass
