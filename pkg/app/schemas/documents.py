from typing import List

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.schemas.timeline import Timestamp


class Segment(BaseModel):
    model_config = ConfigDict(frozen=True)

    timestamp: Timestamp
    text: str


class SourceDocument(BaseModel):
    doc_id: str
    segments: List[Segment]

    @model_validator(mode="after")
    def check_segments(self):
        if not self.segments:
            raise ValueError(f"document {self.doc_id} has no segments")
        for previous, current in zip(self.segments, self.segments[1:]):
            if current.timestamp < previous.timestamp:
                raise ValueError(
                    f"document {self.doc_id}: segment at {current.timestamp} "
                    f"follows {previous.timestamp}"
                )
        return self


class ChunkSource(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: str
    segment_start: int
    segment_end: int  # exclusive
    part: int = 0  # piece index when a single segment was hard-split


class Chunk(BaseModel):
    model_config = ConfigDict(frozen=True)

    chunk_id: str
    anchor: Timestamp
    text: str
    token_count: int = Field(ge=1)
    source: List[ChunkSource]
    keywords: List[str] = Field(default_factory=list)
