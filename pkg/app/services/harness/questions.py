import json
import logging
import random
from typing import Callable, Dict, Iterable, List, Optional

from pydantic import ValidationError

from app.models.enums import QuestionCategory, StructuredKind
from app.schemas.harness import GeneratedQuestion, GoldEvent, GoldLog, WorldSpec
from app.schemas.timeline import Duration, Timestamp
from app.services.harness import oracle
from app.services.qa.context import OPTION_LETTERS
from app.utils.exceptions import (
    EngineException,
    InsufficientEvidenceException,
    MalformedInputException,
)
from app.utils.timeline import (
    TIMELINE_ORIGIN,
    add,
    daypart_of,
    format_timestamp,
    parse_timestamp,
)

logger = logging.getLogger(__name__)

CHOICE_COUNT = 4
ATTEMPTS_PER_QUESTION = 60
# Offsets between the sampled evidence and the query time, in seconds.
QUERY_GAPS = (60, 1800, 3 * 3600, 10 * 3600, 30 * 3600)

CATEGORY_ORDER = [
    QuestionCategory.ENTITY_TRACKING,
    QuestionCategory.EVENT_RECALL,
    QuestionCategory.ENTITY_LOG,
    QuestionCategory.HABIT_INSIGHT,
    QuestionCategory.TASK_DEPENDENCY,
]


class _Draft:
    __slots__ = ("text", "kind", "subject", "target", "day", "daypart", "gold", "evidence_at")

    def __init__(self, text, kind, subject, target=None, day=None, daypart=None):
        self.text = text
        self.kind = kind
        self.subject = subject
        self.target = target
        self.day = day
        self.daypart = daypart
        self.gold: Optional[str] = None
        self.evidence_at: Optional[Timestamp] = None


class QuestionGenerator:
    def __init__(self, gold: GoldLog, spec: WorldSpec, seed: int):
        self.gold = gold
        self.spec = spec
        self.rng = random.Random(seed)
        self.placements = [e for e in gold.events if e.kind == "placement"]
        self.activities = [e for e in gold.events if e.kind == "activity"]
        last = gold.events[-1].timestamp if gold.events else TIMELINE_ORIGIN
        self.horizon = add(last, Duration(seconds=60))
        self.builders: Dict[QuestionCategory, Callable] = {
            QuestionCategory.ENTITY_TRACKING: self._tracking,
            QuestionCategory.EVENT_RECALL: self._recall,
            QuestionCategory.ENTITY_LOG: self._log,
            QuestionCategory.HABIT_INSIGHT: self._habit,
            QuestionCategory.TASK_DEPENDENCY: self._dependency,
        }

    def query_time(self, evidence: GoldEvent) -> Timestamp:
        gap = self.rng.choice(QUERY_GAPS)
        return min(add(evidence.timestamp, Duration(seconds=gap)), self.horizon)

    def _tracking(self, index: int):
        event = self.rng.choice(self.placements)
        text = f"Where did {event.subject} last put the {event.object}?"
        draft = _Draft(text, StructuredKind.WHERE_LAST_SEEN, event.subject, target=event.object)
        return draft, event

    def _recall(self, index: int):
        event = self.rng.choice(self.activities)
        first = index % 2 == 0
        kind = StructuredKind.FIRST_OCCURRENCE if first else StructuredKind.LAST_OCCURRENCE
        text = f"When did {event.subject} {'first' if first else 'last'} {event.activity}?"
        return _Draft(text, kind, event.subject, target=event.activity), event

    def _log(self, index: int):
        event = self.rng.choice(self.activities)
        day = event.timestamp.day
        text = f"How many times did {event.subject} {event.activity} on DAY{day}?"
        draft = _Draft(
            text, StructuredKind.COUNT_OCCURRENCES, event.subject, target=event.activity, day=day
        )
        return draft, event

    def _habit(self, index: int):
        event = self.rng.choice(self.activities)
        daypart = daypart_of(event.timestamp)
        when = "at night" if daypart.value == "night" else f"in the {daypart.value}"
        text = f"What does {event.subject} usually do {when}?"
        draft = _Draft(text, StructuredKind.USUAL_VALUE, event.subject, daypart=daypart)
        return draft, event

    def _dependency(self, index: int):
        event = self.rng.choice(self.activities)
        pronoun = self.spec.person(event.subject).pronoun
        text = f"What did {event.subject} do after {pronoun} last went to {event.activity}?"
        draft = _Draft(text, StructuredKind.AFTER_EVENT, event.subject, target=event.activity)
        return draft, event

    def _resolve(self, draft: _Draft, t_q: Timestamp) -> bool:
        if draft.kind == StructuredKind.USUAL_VALUE:
            found = oracle.usual_activity(self.gold, draft.subject, draft.daypart, t_q)
            # tied modes have no single gold answer
            if found is None or found[2]:
                return False
            draft.gold, draft.evidence_at = found[0], found[1]
            return True
        found = oracle.lookup(
            self.gold, draft.kind, t_q, draft.subject, draft.target, draft.day, draft.daypart
        )
        if found is None:
            return False
        draft.gold, draft.evidence_at = found
        return True

    def _distractors(self, draft: _Draft, t_q: Timestamp) -> List[str]:
        if draft.kind == StructuredKind.WHERE_LAST_SEEN:
            pool = [location.name for location in self.spec.locations]
        elif draft.kind in (StructuredKind.USUAL_VALUE, StructuredKind.AFTER_EVENT):
            pool = [activity.name for activity in self.spec.activities]
        elif draft.kind == StructuredKind.COUNT_OCCURRENCES:
            count = int(draft.gold)
            pool = [str(n) for n in range(max(0, count - 2), count + 4)]
        else:
            seen = oracle.activities_of(self.gold, draft.subject, t_q)
            pool = [format_timestamp(event.timestamp) for event in seen]
            shift = self.spec.slot_seconds
            base = draft.evidence_at.absolute_seconds
            pool += [
                format_timestamp(Timestamp.from_absolute(base + k * shift))
                for k in (-3, -2, -1, 1, 2, 3)
                if base + k * shift >= 0
            ]
        candidates = sorted(set(pool) - {draft.gold})
        return self.rng.sample(candidates, min(CHOICE_COUNT - 1, len(candidates)))

    def question(self, category: QuestionCategory, index: int) -> Optional[GeneratedQuestion]:
        tracking = category == QuestionCategory.ENTITY_TRACKING
        if not (self.placements if tracking else self.activities):
            return None
        draft, evidence = self.builders[category](index)
        t_q = self.query_time(evidence)
        if not self._resolve(draft, t_q):
            return None
        choices = [draft.gold] + self._distractors(draft, t_q)
        self.rng.shuffle(choices)
        return GeneratedQuestion(
            question_id=f"{category.value}-{index:03d}",
            text=draft.text,
            category=category,
            kind=draft.kind,
            t_q=t_q,
            gold=draft.gold,
            choices=choices,
            gold_letter=OPTION_LETTERS[choices.index(draft.gold)],
            evidence_at=draft.evidence_at,
            subject=draft.subject,
            target=draft.target,
            day=draft.day,
            daypart=draft.daypart,
        )


def generate_questions(
    gold: GoldLog, spec: WorldSpec, n_per_category: int, seed: int = 0
) -> List[GeneratedQuestion]:
    """Exactly ``n_per_category`` distinct questions per category, answerable at their t_q."""
    if n_per_category < 0:
        raise ValueError("n_per_category must not be negative")
    if n_per_category == 0:
        return []
    generator = QuestionGenerator(gold, spec, seed)
    questions: List[GeneratedQuestion] = []
    for category in CATEGORY_ORDER:
        seen = set()
        made: List[GeneratedQuestion] = []
        attempts = 0
        while len(made) < n_per_category and attempts < n_per_category * ATTEMPTS_PER_QUESTION:
            attempts += 1
            question = generator.question(category, len(made))
            if question is None or (question.text, question.t_q) in seen:
                continue
            seen.add((question.text, question.t_q))
            made.append(question)
        if len(made) < n_per_category:
            raise InsufficientEvidenceException(
                category.value, f"only {len(made)} of {n_per_category} questions could be grounded"
            )
        questions += made
    logger.info(f"Generated {len(questions)} questions ({n_per_category} per category)")
    return questions


def write_questions_jsonl(questions: Iterable[GeneratedQuestion]) -> str:
    lines = []
    for q in questions:
        row = {
            "question": q.text,
            "timestamp": format_timestamp(q.t_q),
            "choices": q.choices,
            "gold": q.gold,
            "question_id": q.question_id,
            "category": q.category.value,
            "kind": q.kind.value,
            "gold_letter": q.gold_letter,
            "evidence_at": format_timestamp(q.evidence_at),
            "subject": q.subject,
            "target": q.target,
            "day": q.day,
            "daypart": q.daypart.value if q.daypart else None,
        }
        lines.append(json.dumps(row, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def read_questions_jsonl(lines: Iterable[str]) -> List[GeneratedQuestion]:
    questions = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            row["text"] = row.pop("question")
            row["t_q"] = parse_timestamp(row.pop("timestamp"))
            row["evidence_at"] = parse_timestamp(row["evidence_at"])
            questions.append(GeneratedQuestion.model_validate(row))
        except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as e:
            raise MalformedInputException(line_no, f"not a generated question ({e})")
        except EngineException as e:
            raise MalformedInputException(line_no, e.message)
        except ValidationError as e:
            raise MalformedInputException(line_no, e.errors()[0]["msg"])
    return questions
