from functools import wraps
from typing import Any, Callable, Optional, TypeVar

from sqlalchemy.orm import Session

F = TypeVar("F", bound=Callable[..., Any])

EXIT_USAGE = 2
EXIT_CLIENT = 3
EXIT_UNANSWERABLE = 4


def rollback_on_exception(func: F) -> F:
    @wraps(func)
    def wrapper(*args, **kwargs):
        db: Session = kwargs.get("db") or next((a for a in args if isinstance(a, Session)), None)
        # If not found, check if first arg is self and has .db
        if not db and args:
            self_obj = args[0]
            db = getattr(self_obj, "db", None)
        if not db:
            raise ValueError("SQLAlchemy session (db: Session) is required")

        try:
            return func(*args, **kwargs)
        except Exception:
            db.rollback()
            raise

    return wrapper  # type: ignore


class EngineException(Exception):
    exit_code = EXIT_USAGE

    def __init__(self, type_: str, message: str):
        super().__init__(message)
        self.detail = {"type": type_, "message": message}

    @property
    def message(self) -> str:
        return self.detail["message"]


class MalformedTimestampException(EngineException):
    def __init__(self, text: str, offset: int, reason: str):
        super().__init__(
            "MALFORMED_TIMESTAMP",
            f"Malformed timestamp {text!r} at byte {offset}: {reason}",
        )
        self.offset = offset


class OutOfRangeException(EngineException):
    def __init__(self, text: str, offset: int, reason: str):
        super().__init__(
            "TIMESTAMP_OUT_OF_RANGE",
            f"Timestamp {text!r} out of range at byte {offset}: {reason}",
        )
        self.offset = offset


class UnderflowException(EngineException):
    def __init__(self, message: str):
        super().__init__("TIMELINE_UNDERFLOW", message)


class NoCandidateException(EngineException):
    def __init__(self, message: str):
        super().__init__("NO_CANDIDATE", message)


class EmptyInputException(EngineException):
    def __init__(self, message: str = "no segments"):
        super().__init__("EMPTY_INPUT", message)


class RecordSerializationException(EngineException):
    def __init__(self, field: str, value: str, reason: str = "contains a delimiter"):
        super().__init__(
            "RECORD_NOT_SERIALIZABLE",
            f"Field {field} {reason} and cannot be serialized: {value!r}",
        )


class StaleChunkException(EngineException):
    def __init__(self, chunk_id: str, anchor: str, latest: str):
        super().__init__(
            "STALE_CHUNK",
            f"Chunk {chunk_id} anchored at {anchor} is earlier than "
            f"the latest applied anchor {latest}",
        )


class SummarizerFailureException(EngineException):
    exit_code = EXIT_CLIENT

    def __init__(self, message: str):
        super().__init__("SUMMARIZER_FAILURE", message)


class UnsupportedFormatException(EngineException):
    def __init__(self, fmt: str):
        super().__init__("UNSUPPORTED_FORMAT", f"Unsupported export format: {fmt}")


class CorruptStreamException(EngineException):
    def __init__(self, line_no: int, reason: str):
        super().__init__("CORRUPT_STREAM", f"Corrupt graph stream at line {line_no}: {reason}")
        self.line_no = line_no


class DimensionMismatchException(EngineException):
    def __init__(self, expected: int, actual: int):
        super().__init__(
            "DIMENSION_MISMATCH",
            f"Query vector has dimension {actual}, index expects {expected}",
        )


class StaleIndexException(EngineException):
    def __init__(self, index_revision: Optional[int], graph_revision: int):
        super().__init__(
            "STALE_INDEX",
            f"Retrieval index is at revision {index_revision}, graph is at {graph_revision}",
        )


class ClientFailureException(EngineException):
    exit_code = EXIT_CLIENT

    def __init__(self, message: str):
        super().__init__("CLIENT_FAILURE", message)


class UnresolvableException(EngineException):
    exit_code = EXIT_UNANSWERABLE

    def __init__(self, message: str):
        super().__init__("UNRESOLVABLE", message)


class InsufficientEvidenceException(EngineException):
    def __init__(self, category: str, message: str):
        super().__init__("INSUFFICIENT_EVIDENCE", f"{category}: {message}")


class ConfigException(EngineException):
    def __init__(self, message: str):
        super().__init__("INVALID_CONFIG", message)


class MalformedInputException(EngineException):
    def __init__(self, line_no: int, reason: str):
        super().__init__("MALFORMED_INPUT", f"line {line_no}: {reason}")
        self.line_no = line_no
