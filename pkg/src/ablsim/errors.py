"""Exception hierarchy shared by every ablsim module."""


class AblSimError(Exception):
    """Base class for all errors raised by ablsim."""


class ValidationError(AblSimError, ValueError):
    """A structural invariant (normalization, unitarity, completeness...) failed.

    ``invariant`` names the violated property so the CLI can report it.
    """

    invariant = "invariant"

    def __init__(self, message: str, invariant: str | None = None):
        super().__init__(message)
        if invariant is not None:
            self.invariant = invariant


class DimensionMismatch(ValidationError):
    invariant = "dimension"


class ZeroStateError(ValidationError):
    invariant = "nonzero state"


class NormalizationError(ValidationError):
    invariant = "normalization"


class NotUnitaryError(ValidationError):
    invariant = "unitarity"


class NotProjectorError(ValidationError):
    invariant = "projector"


class InvalidMeasurementError(ValidationError):
    invariant = "measurement"


class EmptySpanError(ValidationError):
    invariant = "nonempty span"


class UnknownLabelError(ValidationError, KeyError):
    invariant = "known label"

    def __str__(self) -> str:
        # KeyError would otherwise repr() the message
        return str(self.args[0]) if self.args else ""


class NoAncillaError(ValidationError):
    invariant = "ancilla present"


class ImpossibleOutcome(AblSimError):
    """Projection onto an outcome whose Born probability vanishes."""


class ImpossiblePostSelection(AblSimError):
    """The post-selected outcome never occurs, whatever the intermediate result."""


class IncompleteTable(AblSimError, KeyError):
    """Conditional and marginal tables do not cover the same outcomes."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class EmptySample(AblSimError, ValueError):
    """A Monte-Carlo estimate was requested with zero shots."""
