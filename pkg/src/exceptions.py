"""Application-level exceptions mapped to process exit codes in error_handlers."""


class InvalidInput(Exception):
    """User-supplied data or configuration that failed validation. Exit code 1.

    ``location`` pins the failure inside the input (e.g. ``row 12, column fz2_n``)
    and is appended to the message.
    """

    def __init__(self, message='Invalid input', location=None):
        super().__init__(message)
        self.location = location

    def __str__(self):
        message = super().__str__()
        if self.location:
            return f'{message} ({self.location})'
        return message


class FormatError(InvalidInput):
    """Malformed input file: header, schema, ragged rows, non-numeric cells, sampling."""


class UnknownLayout(InvalidInput):
    """Part names match none of the known skeleton layouts."""


class PairingError(InvalidInput):
    """Estimated values lack a reference counterpart (or vice versa)."""


class PipelineError(Exception):
    """Raised when a processing stage fails on well-formed input. Exit code 2.

    Carries the trial/system ``context`` the failure happened in so batch runs can
    report which trial broke without losing the original message.
    """

    def __init__(self, message='Pipeline error', context=None):
        super().__init__(message)
        self.context = context

    def __str__(self):
        message = super().__str__()
        if self.context:
            return f'{self.context}: {message}'
        return message


class InsufficientData(PipelineError):
    """Too few valid samples, events or contacts to compute a result."""


class AlternationError(PipelineError):
    """Per-foot heel-contact / toe-off alternation is violated."""
