from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.enums import RelativeKind

SECONDS_PER_DAY = 86400


class Timestamp(BaseModel):
    """A point on the multi-day recording timeline.

    Ordering is by day, then second of day. The string form is produced by
    ``app.utils.timeline.format_timestamp``.
    """

    model_config = ConfigDict(frozen=True)

    day: int = Field(ge=1)
    seconds_of_day: int = Field(ge=0, le=SECONDS_PER_DAY - 1)

    @property
    def key(self) -> Tuple[int, int]:
        return (self.day, self.seconds_of_day)

    @property
    def absolute_seconds(self) -> int:
        return (self.day - 1) * SECONDS_PER_DAY + self.seconds_of_day

    @classmethod
    def at(cls, day: int, hours: int = 0, minutes: int = 0, seconds: int = 0) -> "Timestamp":
        return cls(day=day, seconds_of_day=hours * 3600 + minutes * 60 + seconds)

    @classmethod
    def from_absolute(cls, total_seconds: int) -> "Timestamp":
        day, seconds = divmod(total_seconds, SECONDS_PER_DAY)
        return cls(day=day + 1, seconds_of_day=seconds)

    def __lt__(self, other: "Timestamp") -> bool:
        return self.key < other.key

    def __le__(self, other: "Timestamp") -> bool:
        return self.key <= other.key

    def __gt__(self, other: "Timestamp") -> bool:
        return self.key > other.key

    def __ge__(self, other: "Timestamp") -> bool:
        return self.key >= other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __str__(self) -> str:
        hours, rest = divmod(self.seconds_of_day, 3600)
        minutes, seconds = divmod(rest, 60)
        return f"[DAY{self.day} {hours:02d}:{minutes:02d}:{seconds:02d}]"


class Duration(BaseModel):
    model_config = ConfigDict(frozen=True)

    seconds: int = Field(ge=0)

    @classmethod
    def of(cls, hours: int = 0, minutes: int = 0, seconds: int = 0) -> "Duration":
        return cls(seconds=hours * 3600 + minutes * 60 + seconds)


class TimeWindow(BaseModel):
    """Closed interval [start, end] on the timeline."""

    model_config = ConfigDict(frozen=True)

    start: Timestamp
    end: Timestamp

    @model_validator(mode="after")
    def check_order(self):
        if self.end < self.start:
            raise ValueError(f"window end {self.end} precedes start {self.start}")
        return self

    def contains(self, t: Timestamp) -> bool:
        return self.start <= t <= self.end


class RelativeExpr(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: RelativeKind
    ago: Optional[Duration] = None

    @model_validator(mode="after")
    def check_variant(self):
        if self.kind == RelativeKind.AGO and self.ago is None:
            raise ValueError("Ago expressions require a duration")
        if self.kind != RelativeKind.AGO and self.ago is not None:
            raise ValueError(f"{self.kind.value} expressions carry no duration")
        return self
