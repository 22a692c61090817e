"""Brute-force answers computed straight from the gold log.

Nothing here reads the graph. Each lookup scans the raw events at or before the
query time and returns the answer with the timestamp of the evidence it rests
on, or None when the log holds no such evidence.
"""

from typing import Dict, List, Optional, Tuple

from app.models.enums import DayPart, StructuredKind
from app.schemas.harness import GeneratedQuestion, GoldEvent, GoldLog
from app.schemas.timeline import Timestamp
from app.utils.exceptions import InsufficientEvidenceException
from app.utils.timeline import day_window, daypart_of, format_timestamp

OracleResult = Optional[Tuple[str, Timestamp]]


def events_until(gold: GoldLog, t_q: Timestamp) -> List[GoldEvent]:
    return [event for event in gold.events if event.timestamp <= t_q]


def activities_of(gold: GoldLog, person: str, t_q: Timestamp) -> List[GoldEvent]:
    return [
        event
        for event in events_until(gold, t_q)
        if event.kind == "activity" and event.subject == person
    ]


def last_location(gold: GoldLog, obj: str, t_q: Timestamp) -> OracleResult:
    placements = [
        event
        for event in events_until(gold, t_q)
        if event.kind == "placement" and event.object == obj
    ]
    if not placements:
        return None
    latest = placements[-1]
    return latest.location, latest.timestamp


def occurrence(gold: GoldLog, person: str, activity: str, t_q: Timestamp, first: bool):
    matches = [e for e in activities_of(gold, person, t_q) if e.activity == activity]
    if not matches:
        return None
    chosen = matches[0] if first else matches[-1]
    return format_timestamp(chosen.timestamp), chosen.timestamp


def count_on_day(gold: GoldLog, person: str, activity: str, day: int, t_q: Timestamp):
    window = day_window(day)
    matches = [
        event
        for event in activities_of(gold, person, t_q)
        if event.activity == activity and window.contains(event.timestamp)
    ]
    if not matches:
        return None
    return str(len(matches)), matches[-1].timestamp


def usual_activity(
    gold: GoldLog, person: str, daypart: DayPart, t_q: Timestamp
) -> Optional[Tuple[str, Timestamp, bool]]:
    """Modal activity in ``daypart``; ties go to the earliest first occurrence."""
    counts: Dict[str, int] = {}
    first_seen: Dict[str, Timestamp] = {}
    last_seen: Optional[Timestamp] = None
    for event in activities_of(gold, person, t_q):
        if daypart_of(event.timestamp) != daypart:
            continue
        counts[event.activity] = counts.get(event.activity, 0) + 1
        first_seen.setdefault(event.activity, event.timestamp)
        last_seen = event.timestamp
    if not counts:
        return None
    top = max(counts.values())
    tied = sorted((a for a, n in counts.items() if n == top), key=lambda a: first_seen[a])
    return tied[0], last_seen, len(tied) > 1


def activity_after(gold: GoldLog, person: str, activity: str, t_q: Timestamp) -> OracleResult:
    own = activities_of(gold, person, t_q)
    references = [event for event in own if event.activity == activity]
    if not references:
        return None
    anchor = references[-1].timestamp
    following = next((event for event in own if event.timestamp > anchor), None)
    if following is None:
        return None
    return following.activity, following.timestamp


def lookup(
    gold: GoldLog,
    kind: StructuredKind,
    t_q: Timestamp,
    subject: str,
    target: Optional[str] = None,
    day: Optional[int] = None,
    daypart: Optional[DayPart] = None,
) -> OracleResult:
    if kind == StructuredKind.WHERE_LAST_SEEN:
        return last_location(gold, target, t_q)
    if kind in (StructuredKind.FIRST_OCCURRENCE, StructuredKind.LAST_OCCURRENCE):
        first = kind == StructuredKind.FIRST_OCCURRENCE
        return occurrence(gold, subject, target, t_q, first=first)
    if kind == StructuredKind.COUNT_OCCURRENCES:
        return count_on_day(gold, subject, target, day, t_q)
    if kind == StructuredKind.USUAL_VALUE:
        found = usual_activity(gold, subject, daypart, t_q)
        return None if found is None else (found[0], found[1])
    return activity_after(gold, subject, target, t_q)


def oracle_answer(gold: GoldLog, q: GeneratedQuestion) -> str:
    result = lookup(gold, q.kind, q.t_q, q.subject, q.target, q.day, q.daypart)
    if result is None:
        # questions are only generated where the log already answers them
        raise InsufficientEvidenceException(
            q.category.value, f"{q.question_id} has no evidence at or before {q.t_q}"
        )
    return result[0]
