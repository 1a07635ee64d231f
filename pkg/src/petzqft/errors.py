"""Exception hierarchy shared by every module."""


class QftError(ValueError):
    """Base class for all library errors."""


class NotHermitian(QftError):
    pass


class DimensionMismatch(QftError):
    pass


class InvalidState(QftError):
    """Matrix is not a density operator (negative spectrum or bad trace)."""


class SupportViolation(QftError):
    pass


class NotCPTP(QftError):
    pass


class RankDeficientReference(QftError):
    pass


class DegenerateBackward(QftError):
    pass


class MissingAtom(QftError):
    pass


class StepTooLarge(QftError):
    pass


class TruncationInsufficient(QftError):
    pass


class EnergyConservationViolated(QftError):
    pass


class NotPovm(QftError):
    pass


class NotCovariant(QftError):
    pass


class ReferenceNotCommuting(QftError):
    pass


class NotPure(QftError):
    pass


class InconsistentLabels(QftError):
    pass


class ConfigError(QftError):
    """Config file could not be parsed; ``lineno`` is 1-based when known."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
