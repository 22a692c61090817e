import math
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.constants.egocentric_schema import EGOCENTRIC_ATTRIBUTES
from app.models.enums import EntityType, RecordKind


class EgocentricSchema(BaseModel):
    """Closed set of entity types with their ordered attribute keys."""

    entity_types: Dict[EntityType, List[str]] = Field(
        default_factory=lambda: {k: list(v) for k, v in EGOCENTRIC_ATTRIBUTES.items()}
    )

    @model_validator(mode="after")
    def check_types(self):
        if set(self.entity_types) != set(EntityType):
            raise ValueError("schema must define exactly person, location, object and event")
        return self

    def keys_for(self, entity_type: EntityType) -> List[str]:
        return self.entity_types[entity_type]

    def type_names(self) -> List[str]:
        return [entity_type.value for entity_type in EntityType]

    def attributes_line(self) -> str:
        return "; ".join(
            f"{entity_type.value}: {', '.join(self.entity_types[entity_type])}"
            for entity_type in EntityType
        )

    def lookup_type(self, name: str) -> Optional[EntityType]:
        normalized = name.strip().strip('"').strip().lower()
        for entity_type in EntityType:
            if entity_type.value == normalized:
                return entity_type
        return None


class DelimiterConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tuple_delimiter: str = "<|>"
    record_delimiter: str = "##"
    completion_delimiter: str = "<|COMPLETE|>"

    @model_validator(mode="after")
    def check_distinct(self):
        delimiters = [self.tuple_delimiter, self.record_delimiter, self.completion_delimiter]
        if any(not d for d in delimiters):
            raise ValueError("delimiters must be non-empty")
        for i, first in enumerate(delimiters):
            for second in delimiters[i + 1 :]:
                if first in second or second in first:
                    raise ValueError(f"delimiters {first!r} and {second!r} overlap")
        return self

    def all(self) -> List[str]:
        return [self.tuple_delimiter, self.record_delimiter, self.completion_delimiter]


class EntityRec(BaseModel):
    kind: RecordKind = RecordKind.ENTITY
    name: str
    entity_type: EntityType
    description: str
    attributes: Dict[str, str] = Field(default_factory=dict)


class RelationRec(BaseModel):
    kind: RecordKind = RecordKind.RELATIONSHIP
    source: str
    target: str
    description: str
    keywords: List[str] = Field(default_factory=list)
    strength: float

    @field_validator("strength")
    @classmethod
    def check_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("relationship strength must be finite")
        return value


class KeywordsRec(BaseModel):
    kind: RecordKind = RecordKind.CONTENT_KEYWORDS
    keywords: List[str]


ExtractionRecord = Union[EntityRec, RelationRec, KeywordsRec]


class ParseFault(BaseModel):
    record_index: int
    reason: str
    snippet: str = ""


class ExtractionParseResult(BaseModel):
    records: List[ExtractionRecord] = Field(default_factory=list)
    # One fault per dropped record.
    faults: List[ParseFault] = Field(default_factory=list)
    # Field-level problems inside records that were kept.
    warnings: List[ParseFault] = Field(default_factory=list)
