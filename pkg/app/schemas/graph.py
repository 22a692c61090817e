import math
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.models.enums import EntityType
from app.schemas.documents import Chunk
from app.schemas.extraction import EgocentricSchema
from app.schemas.timeline import Timestamp


class TimedDescription(BaseModel):
    model_config = ConfigDict(frozen=True)

    timestamp: Timestamp
    text: str
    chunk_id: str
    # Edge observations only: the reported strength and the node the record pointed from.
    strength: Optional[float] = None
    direction: Optional[str] = None


class AttributeEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: str
    updated_at: Timestamp


class AttributeState(BaseModel):
    """Current attribute value plus every value it held, oldest first."""

    history: List[AttributeEntry] = Field(min_length=1)

    @property
    def value(self) -> str:
        return self.history[-1].value

    @property
    def updated_at(self) -> Timestamp:
        return self.history[-1].updated_at


class EntityNode(BaseModel):
    node_id: str
    entity_type: EntityType
    name: str
    attributes: Dict[str, AttributeState] = Field(default_factory=dict)
    timestamps: List[Timestamp] = Field(default_factory=list)
    descriptions: List[TimedDescription] = Field(default_factory=list)
    source_chunks: List[str] = Field(default_factory=list)
    stub: bool = False

    def latest_description(self) -> str:
        return self.descriptions[-1].text if self.descriptions else ""

    def attribute_values(self) -> Dict[str, str]:
        return {key: state.value for key, state in self.attributes.items()}


class RelationEdge(BaseModel):
    edge_id: str
    source: str
    target: str
    timestamps: List[Timestamp] = Field(default_factory=list)
    descriptions: List[TimedDescription] = Field(default_factory=list)
    # keyword -> first timestamp it was observed at
    keywords: Dict[str, Timestamp] = Field(default_factory=dict)
    strength: Optional[float] = None
    strength_updated_at: Optional[Timestamp] = None

    def latest_description(self) -> str:
        return self.descriptions[-1].text if self.descriptions else ""

    def other_end(self, node_id: str) -> str:
        return self.target if node_id == self.source else self.source

    def touches(self, node_id: str) -> bool:
        return node_id in (self.source, self.target)


class TemporalGraph(BaseModel):
    nodes: Dict[str, EntityNode] = Field(default_factory=dict)
    edges: Dict[str, RelationEdge] = Field(default_factory=dict)
    chunks: Dict[str, Chunk] = Field(default_factory=dict)
    entity_schema: EgocentricSchema = Field(default_factory=EgocentricSchema)
    # Bumped by every write; retrieval indexes compare against it.
    revision: int = 0
    latest_anchor: Optional[Timestamp] = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TemporalGraph):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.edges == other.edges
            and self.chunks == other.chunks
            and self.entity_schema == other.entity_schema
        )

    def is_empty(self) -> bool:
        return not self.nodes and not self.edges and not self.chunks

    def edges_of(self, node_id: str) -> List[RelationEdge]:
        return [edge for edge in self.edges.values() if edge.touches(node_id)]


class MergePolicy(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name_normalization: Literal["casefold_whitespace"] = "casefold_whitespace"
    similarity_threshold: float = Field(default=0.90, gt=0.0, le=1.0)
    summarize_after: int = Field(default=100, ge=1)
    strict_ordering: bool = True

    @field_validator("similarity_threshold")
    @classmethod
    def check_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("similarity threshold must be finite")
        return value


class AttributeOverwrite(BaseModel):
    node_id: str
    key: str
    old_value: Optional[str] = None
    new_value: str
    updated_at: Timestamp


class MergeReport(BaseModel):
    chunk_id: str
    anchor: Timestamp
    skipped: bool = False
    created_nodes: List[str] = Field(default_factory=list)
    merged_nodes: List[str] = Field(default_factory=list)
    stub_nodes: List[str] = Field(default_factory=list)
    created_edges: List[str] = Field(default_factory=list)
    merged_edges: List[str] = Field(default_factory=list)
    attribute_overwrites: List[AttributeOverwrite] = Field(default_factory=list)
    faults: List[str] = Field(default_factory=list)

    def touched_nodes(self) -> List[str]:
        return sorted(set(self.created_nodes + self.merged_nodes + self.stub_nodes))

    def touched_edges(self) -> List[str]:
        return sorted(set(self.created_edges + self.merged_edges))


class BuildSummary(BaseModel):
    chunks_applied: int = 0
    chunks_skipped: int = 0
    nodes_created: int = 0
    node_merges: int = 0
    stubs_created: int = 0
    edges_created: int = 0
    edge_merges: int = 0
    attribute_overwrites: int = 0
    parse_faults: int = 0
    merge_faults: int = 0
    summarized_elements: int = 0

    def add(self, report: MergeReport):
        if report.skipped:
            self.chunks_skipped += 1
            return
        self.chunks_applied += 1
        self.nodes_created += len(report.created_nodes)
        self.node_merges += len(report.merged_nodes)
        self.stubs_created += len(report.stub_nodes)
        self.edges_created += len(report.created_edges)
        self.edge_merges += len(report.merged_edges)
        self.attribute_overwrites += len(report.attribute_overwrites)
        self.merge_faults += len(report.faults)


class GraphStats(BaseModel):
    nodes_by_type: Dict[str, int] = Field(default_factory=dict)
    node_count: int = 0
    edge_count: int = 0
    chunk_count: int = 0
    node_timestamps: int = 0
    edge_timestamps: int = 0
    descriptions: int = 0
    stub_count: int = 0

    def summary_line(self) -> str:
        counts = self.nodes_by_type
        return (
            f"{self.node_count} entities ({counts.get('person', 0)} persons, "
            f"{counts.get('event', 0)} events, {counts.get('object', 0)} objects, "
            f"{counts.get('location', 0)} locations), {self.edge_count} relationships"
        )
