"""Exception hierarchy shared by every module."""


class MsdError(Exception):
    """Base class for all package errors."""


class DomainError(MsdError, ValueError):
    """An argument lies outside the admissible domain."""


class UnsupportedModelError(DomainError):
    """The operation is not defined for the given process kind."""


class RegimeError(DomainError):
    """The diffusion exponent lies in a regime the operation does not cover."""


class DegenerateInputError(DomainError):
    """Input data are degenerate (e.g. a zero MSD from a constant path)."""


class RankError(DomainError):
    """A regression design is rank deficient."""


class IngestError(DomainError):
    """A tracking file could not be parsed; carries the offending row."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class NumericalError(MsdError, ArithmeticError):
    """A numerical procedure failed to reach its requested accuracy."""

    def __init__(self, message, achieved=None):
        if achieved is not None:
            message = f"{message} (achieved accuracy {achieved:.3g})"
        super().__init__(message)
        self.achieved = achieved
