"""Exception hierarchy shared across the toolkit.

Every error carries a machine-readable payload (``code``, ``message``,
``detail``) so the CLI and the HTTP service can report it uniformly.
"""

from __future__ import annotations


class DpmError(Exception):
    """Base class for all toolkit errors."""

    #: Coarse error family used on the wire: ValidationError, QueryParseError,
    #: TrainingBusy or NotFound.
    code = "ValidationError"

    def __init__(self, message: str, **detail):
        super().__init__(message)
        self.detail = {k: v for k, v in detail.items() if v is not None}

    def to_payload(self) -> dict:
        detail = {"kind": type(self).__name__, **self.detail}
        return {"code": self.code, "message": str(self), "detail": detail}


# --- ingest -----------------------------------------------------------------

class IngestError(DpmError):
    pass


class MalformedCsv(IngestError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message, row=row)
        self.row = row


class DuplicateVisit(IngestError):
    def __init__(self, subject_id: str, age_months: float):
        super().__init__(
            f"subject {subject_id!r} has two visits at age {age_months}",
            subject_id=subject_id, age_months=age_months)


class NonBinaryValue(IngestError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(
            f"row {row}, column {column!r}: expected 0, 1 or empty, got {value!r}",
            row=row, column=column, value=value)
        self.row = row


class NegativeAge(IngestError):
    def __init__(self, row: int, age_months: float):
        super().__init__(f"row {row}: negative age {age_months}", row=row,
                         age_months=age_months)


class UnknownColumn(IngestError):
    def __init__(self, columns: list[str]):
        super().__init__(f"config references absent column(s): {columns}",
                         columns=columns)


class InvalidConfig(IngestError):
    pass


# --- hmm --------------------------------------------------------------------

class HmmError(DpmError):
    pass


class UnknownVariable(HmmError):
    def __init__(self, variables: list[str]):
        super().__init__(f"variable(s) not shared by model and data: {variables}",
                         variables=variables)


class DegenerateData(HmmError):
    def __init__(self, restart: int, state: int):
        super().__init__(
            f"restart {restart}: state {state} has zero expected occupancy "
            "after re-initialization", restart=restart, state=state)


# --- summaries --------------------------------------------------------------

class EmptySamples(DpmError):
    def __init__(self, message: str = "density estimation needs at least one sample"):
        super().__init__(message)


class UnknownOutcome(DpmError):
    code = "NotFound"

    def __init__(self, outcome: str):
        super().__init__(f"unknown outcome {outcome!r}", outcome=outcome)


# --- query language ---------------------------------------------------------

class QueryError(DpmError):
    code = "QueryParseError"


class QuerySyntaxError(QueryError):
    def __init__(self, offset: int, expected: list[str], found: str):
        super().__init__(
            f"syntax error at offset {offset}: expected {', '.join(expected)}, "
            f"found {found}", offset=offset, expected=expected, found=found)
        self.offset = offset
        self.expected = expected


class DuplicateAttr(QueryError):
    def __init__(self, offset: int, attr: str):
        super().__init__(f"attribute {attr!r} repeated at offset {offset}",
                         offset=offset, attr=attr)
        self.offset = offset


class BadAttrValue(QueryError):
    def __init__(self, offset: int, attr: str, reason: str):
        super().__init__(f"bad value for {attr!r} at offset {offset}: {reason}",
                         offset=offset, attr=attr, reason=reason)
        self.offset = offset


class StateOutOfRange(QueryError):
    def __init__(self, state: int, n_states: int):
        super().__init__(
            f"query references state {state} but the model has {n_states} states",
            state=state, n_states=n_states)


# --- service ----------------------------------------------------------------

class NotFound(DpmError):
    code = "NotFound"

    def __init__(self, resource: str, resource_id: str):
        super().__init__(f"{resource} {resource_id!r} not found",
                         resource=resource, id=resource_id)


class TrainingBusy(DpmError):
    code = "TrainingBusy"

    def __init__(self):
        super().__init__("a training job is already running")
