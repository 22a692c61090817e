import string
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from app.models.enums import (
    AnswerConfidence,
    AnswerPath,
    DayPart,
    ElementKind,
    StructuredKind,
)
from app.schemas.timeline import RelativeExpr, TimeWindow, Timestamp

MIN_CHOICES = 2
# one option letter per choice
MAX_CHOICES = len(string.ascii_uppercase)


def validate_choice_count(value: Optional[List[str]]) -> Optional[List[str]]:
    if value is not None and not MIN_CHOICES <= len(value) <= MAX_CHOICES:
        raise ValueError(f"choices must number between {MIN_CHOICES} and {MAX_CHOICES}")
    return value


class QARequest(BaseModel):
    question: str
    t_q: Timestamp
    history: List[Tuple[str, str]] = Field(default_factory=list)
    response_type: str = "A short answer citing the timestamps it relies on"
    user_prompt: str = ""
    choices: Optional[List[str]] = None

    @field_validator("question")
    @classmethod
    def check_question(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("question must be non-empty")
        return value

    @field_validator("choices")
    @classmethod
    def check_choices(cls, value: Optional[List[str]]) -> Optional[List[str]]:
        return validate_choice_count(value)


class EntityContext(BaseModel):
    name: str
    type: str
    attributes: dict = Field(default_factory=dict)
    timestamps: List[str] = Field(default_factory=list)
    descriptions: List[List[str]] = Field(default_factory=list)


class RelationContext(BaseModel):
    source: str
    target: str
    timestamps: List[str] = Field(default_factory=list)
    descriptions: List[List[str]] = Field(default_factory=list)
    keywords: List[str] = Field(default_factory=list)


class ChunkContext(BaseModel):
    chunk_id: str
    anchor: str
    text: str


class ContextPayload(BaseModel):
    entities: List[EntityContext] = Field(default_factory=list)
    relations: List[RelationContext] = Field(default_factory=list)
    chunks: List[ChunkContext] = Field(default_factory=list)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    def is_empty(self) -> bool:
        return not self.entities and not self.relations and not self.chunks


class StructuredTemporalQuery(BaseModel):
    kind: StructuredKind
    subject: str
    object: Optional[str] = None
    location: Optional[str] = None
    window: Optional[TimeWindow] = None
    daypart: Optional[DayPart] = None
    relative: Optional[RelativeExpr] = None
    day: Optional[int] = None

    @field_validator("subject")
    @classmethod
    def check_subject(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("subject must be non-empty")
        return value.strip()


class SourceRef(BaseModel):
    element_id: str
    kind: ElementKind


class Answer(BaseModel):
    text: str
    cited_timestamps: List[Timestamp] = Field(default_factory=list)
    sources: List[SourceRef] = Field(default_factory=list)
    confidence: AnswerConfidence
    path: AnswerPath
    choice: Optional[str] = None
    ambiguous: bool = False
    diagnostics: List[str] = Field(default_factory=list)

    def render(self) -> str:
        lines = [f"answer: {self.text}"]
        if self.choice:
            lines.append(f"choice: {self.choice}")
        lines.append(f"cited: {', '.join(str(t) for t in self.cited_timestamps) or '-'}")
        lines.append(f"path: {self.path.value} ({self.confidence.value})")
        sources = ", ".join(f"{s.kind.value}:{s.element_id}" for s in self.sources)
        lines.append(f"sources: {sources or '-'}")
        for note in self.diagnostics:
            lines.append(f"note: {note}")
        return "\n".join(lines)


class QABatchItem(BaseModel):
    question: str
    timestamp: str
    choices: Optional[List[str]] = None
    gold: Optional[str] = None

    @field_validator("choices")
    @classmethod
    def check_choices(cls, value: Optional[List[str]]) -> Optional[List[str]]:
        return validate_choice_count(value)
