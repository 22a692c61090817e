from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from app.models.enums import AnswerPath, DayPart, QuestionCategory, StructuredKind
from app.schemas.timeline import Timestamp


class PersonSpec(BaseModel):
    name: str
    gender: str
    appearance: str
    hometown: str
    habits: List[str] = Field(default_factory=list)  # activity names this person favours

    @property
    def pronoun(self) -> str:
        return {"female": "she", "male": "he"}.get(self.gender, "they")


class ObjectSpec(BaseModel):
    name: str
    type: str
    color: str
    owner: str


class LocationSpec(BaseModel):
    name: str
    description: str


class ActivityTemplate(BaseModel):
    name: str  # base phrase, e.g. "play the piano"
    present: str  # third-person phrase, e.g. "plays the piano"
    location: str
    arity: int = Field(default=1, ge=1, le=2)
    recurrence: Dict[DayPart, float] = Field(default_factory=dict)

    @field_validator("recurrence")
    @classmethod
    def check_probabilities(cls, value: Dict[DayPart, float]) -> Dict[DayPart, float]:
        for part, probability in value.items():
            if not 0.0 <= probability <= 1.0:
                raise ValueError(f"recurrence for {part.value} must be in [0, 1]")
        return value


class WorldSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    days: int = Field(default=7, ge=1)
    slot_seconds: int = Field(default=120, ge=60)
    day_start_hour: int = Field(default=8, ge=1, le=23)
    day_end_hour: int = Field(default=22, ge=1, le=24)
    habit_boost: float = Field(default=2.5, ge=1.0)
    placement_rate: float = Field(default=0.35, ge=0.0, le=1.0)
    persons: List[PersonSpec]
    objects: List[ObjectSpec]
    locations: List[LocationSpec]
    activities: List[ActivityTemplate]

    @model_validator(mode="after")
    def check_vocabularies(self):
        if not (self.persons and self.locations and self.activities):
            raise ValueError("persons, locations and activities must be non-empty")
        if self.day_end_hour <= self.day_start_hour:
            raise ValueError("day must end after it starts")
        person_names = {p.name for p in self.persons}
        location_names = {loc.name for loc in self.locations}
        for obj in self.objects:
            if obj.owner not in person_names:
                raise ValueError(f"object {obj.name} has unknown owner {obj.owner}")
        for activity in self.activities:
            if activity.location not in location_names:
                raise ValueError(f"activity {activity.name} uses unknown location")
            if activity.arity == 2 and len(self.persons) < 2:
                raise ValueError(f"activity {activity.name} needs a companion")
        for person in self.persons:
            unknown = set(person.habits) - {a.name for a in self.activities}
            if unknown:
                raise ValueError(f"{person.name} has unknown habits {sorted(unknown)}")
        return self

    def activity(self, name: str) -> ActivityTemplate:
        return next(a for a in self.activities if a.name == name)

    def person(self, name: str) -> PersonSpec:
        return next(p for p in self.persons if p.name == name)


class GoldEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    timestamp: Timestamp
    kind: str  # "activity" or "placement"
    subject: str
    location: str
    activity: Optional[str] = None
    companion: Optional[str] = None
    object: Optional[str] = None
    effects: Dict[str, str] = Field(default_factory=dict)


class GoldLog(BaseModel):
    events: List[GoldEvent] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_order(self):
        for previous, current in zip(self.events, self.events[1:]):
            if not previous.timestamp < current.timestamp:
                raise ValueError(f"gold events out of order at {current.timestamp}")
        return self


class GeneratedQuestion(BaseModel):
    question_id: str
    text: str
    category: QuestionCategory
    kind: StructuredKind
    t_q: Timestamp
    gold: str
    choices: List[str]
    gold_letter: str
    evidence_at: Timestamp
    subject: str
    target: Optional[str] = None
    day: Optional[int] = None
    daypart: Optional[DayPart] = None

    @model_validator(mode="after")
    def check_gold(self):
        if self.gold not in self.choices:
            raise ValueError(f"{self.question_id}: gold not among choices")
        if self.evidence_at > self.t_q:
            raise ValueError(f"{self.question_id}: evidence after query time")
        return self


class CategoryScore(BaseModel):
    total: int = 0
    correct: int = 0

    @computed_field
    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def add(self, correct: bool):
        self.total += 1
        self.correct += int(correct)


class QuestionOutcome(BaseModel):
    question_id: str
    category: QuestionCategory
    predicted: Optional[str] = None
    gold: str
    correct: bool
    path: AnswerPath
    latency_ms: float = 0.0
    gap_seconds: int


class EvaluationReport(BaseModel):
    question_count: int = 0
    accuracy: float = 0.0
    per_category: Dict[str, CategoryScore] = Field(default_factory=dict)
    per_gap_bucket: Dict[str, CategoryScore] = Field(default_factory=dict)
    paths: Dict[str, int] = Field(default_factory=dict)
    unanswerable: int = 0
    latency_ms: Dict[str, float] = Field(default_factory=dict)
    outcomes: List[QuestionOutcome] = Field(default_factory=list)


class ScalingPoint(BaseModel):
    days: int
    question_count: int
    accuracy: float
    median_latency_ms: float
    node_count: int
    edge_count: int
