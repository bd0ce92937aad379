"""Exception hierarchy.

Everything raised for bad input derives from :class:`ValidationError` so the
command line can map it to exit code 1; plain ``OSError`` maps to 2.
"""


class ValidationError(ValueError):
    pass


class EmptyScreenplayError(ValidationError):
    pass


class MalformedScriptError(ValidationError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ManifestError(ValidationError):
    pass


class DuplicateKeyError(ValidationError):
    pass


class UnknownLabelError(ManifestError):
    pass


class ParseError(ValidationError):
    pass


class UnalignedSentenceError(ParseError):
    pass


class DimensionMismatchError(ValidationError):
    pass


class EmptyInputError(ValidationError):
    pass


class DivergedTrainingError(ValidationError):
    pass


class InvalidEpsilonError(ValidationError):
    pass


class ModelFormatError(ValidationError):
    pass


class TruncatedModelError(ModelFormatError):
    pass


class OddWindowError(ValidationError):
    pass


class TooFewMoviesError(ValidationError):
    pass


class GatingError(ValidationError):
    """A LOW-violence utterance reached role assignment."""


class DegenerateVarianceError(ValidationError):
    pass


class TooFewGroupsError(ValidationError):
    pass


class ZeroMarginalError(ValidationError):
    pass
