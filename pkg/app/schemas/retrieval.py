from typing import List, Optional

from pydantic import BaseModel, Field

from app.models.enums import ElementKind
from app.schemas.timeline import Timestamp


class ScoredElement(BaseModel):
    element_id: str
    score: float


class RetrievalResult(BaseModel):
    nodes: List[ScoredElement] = Field(default_factory=list)
    edges: List[ScoredElement] = Field(default_factory=list)
    chunks: List[ScoredElement] = Field(default_factory=list)
    k: int
    t_q: Optional[Timestamp] = None
    high_level_keywords: List[str] = Field(default_factory=list)
    low_level_keywords: List[str] = Field(default_factory=list)
    keyword_fallback: bool = False

    def ranked(self, kind: ElementKind) -> List[ScoredElement]:
        return {ElementKind.NODE: self.nodes, ElementKind.EDGE: self.edges}.get(kind, self.chunks)


class KeywordResult(BaseModel):
    high_level: List[str] = Field(default_factory=list)
    low_level: List[str] = Field(default_factory=list)
    # Set when a configured client failed and the heuristic answered instead.
    fallback: bool = False


class EmbeddingCacheEntry(BaseModel):
    provider: str
    text_hash: str
    vector: List[float]
