"""Exception types shared across the package."""


class EegMinSetError(Exception):
    """Base class for all package errors."""


class InvariantViolation(EegMinSetError):
    """A domain object would violate one of its declared invariants."""


class ParseError(EegMinSetError):
    """A file or config could not be parsed."""


class MissingElectrode(EegMinSetError):
    """A channel references an electrode the recording does not contain."""


class SignalTooShort(EegMinSetError):
    """Signal shorter than one feature window."""


class OutOfRange(EegMinSetError):
    """Index range falls outside the available data."""


class TooFewWindows(EegMinSetError):
    """Fewer feature windows than the model window length K."""


class EmptyTrainingSet(EegMinSetError):
    """No training windows were supplied."""


class MixedClassTraining(EegMinSetError):
    """One-class training received windows of more than one label."""


class NonFiniteLoss(EegMinSetError):
    """Training produced a NaN or infinite loss."""


class DimensionMismatch(EegMinSetError):
    """Vector or matrix dimensions do not agree."""


class VersionMismatch(EegMinSetError):
    """Serialized model carries an unsupported format version."""


class EmptyScores(EegMinSetError):
    """Threshold calibration received no scores."""


class TooFewRecordings(EegMinSetError):
    """Fewer recordings than requested folds."""


class MissingReference(EegMinSetError):
    """Evaluation report lacks the reference set-up."""


class UndefinedFScore(EegMinSetError):
    """F-score undefined: no positive ground truth and no positive predictions."""
