"""Exception types shared across the package.

Every exception carries a machine-readable ``code`` so the HTTP layer can
map failures onto the documented error body without string matching.
"""


class WorkbenchError(Exception):
    """Base class for all package errors."""

    code = "internal"


class InvalidArgumentError(WorkbenchError, ValueError):
    """Caller violated a documented precondition."""

    code = "invalid_argument"


class NotFoundError(WorkbenchError, LookupError):
    """A referenced entity does not exist."""

    code = "not_found"


class ConflictError(WorkbenchError):
    """Operation clashes with current state (e.g. a query is already pending)."""

    code = "conflict"


class VerdictNotInQueryError(ConflictError):
    """A feedback verdict referenced a proposal outside the pending query."""

    code = "verdict_not_in_query"


class CalibrationFailureError(WorkbenchError):
    """An exemplar model could not be calibrated (its own raw score was <= 0)."""

    code = "calibration_failure"

    def __init__(self, exemplar_id: str, message: str | None = None):
        self.exemplar_id = exemplar_id
        super().__init__(message or f"calibration failed for exemplar {exemplar_id!r}: raw score <= 0")


class TrainingFailureError(WorkbenchError):
    """Training produced no usable model (e.g. every exemplar was dropped)."""

    code = "training_failure"


class SessionComplete(WorkbenchError):
    """Signal: every exemplar of an active-learning session has been processed."""

    code = "session_complete"
