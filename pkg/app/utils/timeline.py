"""Timestamp grammar, arithmetic and relative-time resolution.

Canonical form is ``[DAY<d> HH:MM:SS]`` (unpadded day, two-digit time fields).
The parser also accepts the ``[Day<d>, HH:MM:SS]`` variant with any letter case.
"""

import bisect
import re
from typing import List, Optional, Sequence, Union

from app.models.enums import DayPart, RelativeKind
from app.schemas.timeline import SECONDS_PER_DAY, Duration, RelativeExpr, TimeWindow, Timestamp
from app.utils.exceptions import (
    MalformedTimestampException,
    NoCandidateException,
    OutOfRangeException,
    UnderflowException,
)

TIMELINE_ORIGIN = Timestamp(day=1, seconds_of_day=0)
END_OF_TIME = Timestamp(day=10**9, seconds_of_day=SECONDS_PER_DAY - 1)

# Loose pattern used to find timestamps inside free text (model replies).
TIMESTAMP_PATTERN = re.compile(r"\[\s*day\s*\d+\s*,?\s+\d{2}:\d{2}:\d{2}\s*\]", re.IGNORECASE)

DAYPART_BOUNDS = {
    DayPart.NIGHT: (0, 6 * 3600),
    DayPart.MORNING: (6 * 3600, 12 * 3600),
    DayPart.AFTERNOON: (12 * 3600, 18 * 3600),
    DayPart.EVENING: (18 * 3600, SECONDS_PER_DAY),
}


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def byte_offset(self, pos: Optional[int] = None) -> int:
        return len(self.text[: self.pos if pos is None else pos].encode("utf-8"))

    def fail(self, reason: str) -> MalformedTimestampException:
        return MalformedTimestampException(self.text, self.byte_offset(), reason)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_spaces(self) -> int:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.pos - start

    def expect(self, literal: str, case_insensitive: bool = False):
        chunk = self.text[self.pos : self.pos + len(literal)]
        matches = chunk.lower() == literal.lower() if case_insensitive else chunk == literal
        if not matches:
            raise self.fail(f"expected {literal!r}")
        self.pos += len(literal)

    def digits(self, exact: Optional[int] = None) -> int:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] in "0123456789":
            self.pos += 1
        count = self.pos - start
        if count == 0 or (exact is not None and count != exact):
            self.pos = start
            wanted = f"{exact} digits" if exact else "digits"
            raise self.fail(f"expected {wanted}")
        return int(self.text[start : self.pos])


def parse_timestamp(text: str) -> Timestamp:
    cursor = _Cursor(text)
    cursor.skip_spaces()
    cursor.expect("[")
    cursor.expect("DAY", case_insensitive=True)
    day_pos = cursor.pos
    day = cursor.digits()
    if cursor.peek() == ",":
        cursor.pos += 1
    if cursor.skip_spaces() == 0:
        raise cursor.fail("expected whitespace between day and time")

    fields = []
    for index in range(3):
        if index:
            cursor.expect(":")
        fields.append((cursor.pos, cursor.digits(exact=2)))
    cursor.expect("]")
    cursor.skip_spaces()
    if cursor.pos != len(text):
        raise cursor.fail("unexpected trailing characters")

    if day < 1:
        raise OutOfRangeException(text, cursor.byte_offset(day_pos), "day is 1-based")
    limits = (("hour", 23), ("minute", 59), ("second", 59))
    for (pos, value), (name, limit) in zip(fields, limits):
        if value > limit:
            raise OutOfRangeException(text, cursor.byte_offset(pos), f"{name} {value} > {limit}")

    (_, hours), (_, minutes), (_, seconds) = fields
    return Timestamp(day=day, seconds_of_day=hours * 3600 + minutes * 60 + seconds)


def format_timestamp(t: Timestamp) -> str:
    return str(t)


def subtract(t: Timestamp, d: Duration) -> Timestamp:
    total = t.absolute_seconds - d.seconds
    if total < 0:
        raise UnderflowException(f"{t} minus {d.seconds}s falls before {TIMELINE_ORIGIN}")
    return Timestamp.from_absolute(total)


def add(t: Timestamp, d: Duration) -> Timestamp:
    return Timestamp.from_absolute(t.absolute_seconds + d.seconds)


def seconds_between(earlier: Timestamp, later: Timestamp) -> int:
    return later.absolute_seconds - earlier.absolute_seconds


def day_window(day: int) -> TimeWindow:
    return TimeWindow(
        start=Timestamp(day=day, seconds_of_day=0),
        end=Timestamp(day=day, seconds_of_day=SECONDS_PER_DAY - 1),
    )


def daypart_of(t: Timestamp) -> DayPart:
    for part, (low, high) in DAYPART_BOUNDS.items():
        if low <= t.seconds_of_day < high:
            return part
    return DayPart.NIGHT


def resolve_relative(
    expr: RelativeExpr, t_q: Timestamp, candidates: Sequence[Timestamp]
) -> Union[Timestamp, TimeWindow]:
    if expr.kind == RelativeKind.LAST_TIME:
        index = bisect.bisect_left(candidates, t_q)
        if index == 0:
            raise NoCandidateException(f"no candidate timestamp before {t_q}")
        return candidates[index - 1]
    if expr.kind == RelativeKind.FIRST_TIME:
        if not candidates:
            raise NoCandidateException("no candidate timestamps")
        return candidates[0]
    if expr.kind == RelativeKind.YESTERDAY:
        if t_q.day == 1:
            raise UnderflowException(f"no day before {t_q}")
        return day_window(t_q.day - 1)
    if expr.kind == RelativeKind.TODAY:
        return day_window(t_q.day)
    return subtract(t_q, expr.ago)


_UNIT_SECONDS = {"second": 1, "minute": 60, "hour": 3600, "day": SECONDS_PER_DAY}
_AGO_PATTERN = re.compile(
    r"\b(?P<count>\d+|an?|one|two|three|four|five|six)\s+"
    r"(?P<unit>second|minute|hour|day)s?\s+ago\b",
    re.IGNORECASE,
)
_WORD_NUMBERS = {"a": 1, "an": 1, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6}


def parse_relative_expression(text: str) -> Optional[RelativeExpr]:
    lowered = text.lower()
    match = _AGO_PATTERN.search(lowered)
    if match:
        count = match.group("count")
        amount = int(count) if count.isdigit() else _WORD_NUMBERS[count]
        seconds = amount * _UNIT_SECONDS[match.group("unit")]
        return RelativeExpr(kind=RelativeKind.AGO, ago=Duration(seconds=seconds))
    if re.search(r"\byesterday\b", lowered):
        return RelativeExpr(kind=RelativeKind.YESTERDAY)
    if re.search(r"\btoday\b", lowered):
        return RelativeExpr(kind=RelativeKind.TODAY)
    if re.search(r"\blast time\b", lowered):
        return RelativeExpr(kind=RelativeKind.LAST_TIME)
    if re.search(r"\bfirst time\b", lowered):
        return RelativeExpr(kind=RelativeKind.FIRST_TIME)
    return None


def find_timestamps(text: str) -> List[Timestamp]:
    """All well-formed timestamps mentioned in ``text``, in order of appearance."""
    found = []
    for match in TIMESTAMP_PATTERN.finditer(text):
        try:
            found.append(parse_timestamp(match.group(0)))
        except (MalformedTimestampException, OutOfRangeException):
            continue
    return found


def insert_sorted_unique(timestamps: List[Timestamp], t: Timestamp) -> bool:
    """Insert ``t`` keeping the list strictly ascending. Returns False when already present."""
    index = bisect.bisect_left(timestamps, t)
    if index < len(timestamps) and timestamps[index] == t:
        return False
    timestamps.insert(index, t)
    return True


def truncate_at(timestamps: Sequence[Timestamp], t_q: Timestamp) -> List[Timestamp]:
    return list(timestamps[: bisect.bisect_right(timestamps, t_q)])
