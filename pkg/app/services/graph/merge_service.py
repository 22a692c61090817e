import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.constants.egocentric_schema import STUB_ENTITY_TYPE
from app.schemas.documents import Chunk
from app.schemas.extraction import EntityRec, ExtractionRecord, KeywordsRec, RelationRec
from app.schemas.graph import (
    AttributeEntry,
    AttributeOverwrite,
    AttributeState,
    EntityNode,
    MergePolicy,
    MergeReport,
    RelationEdge,
    TemporalGraph,
    TimedDescription,
)
from app.schemas.timeline import Timestamp
from app.services.graph.temporal_graph import (
    add_description,
    add_source_chunk,
    add_timestamp,
    edge_id_for,
    find_node,
    node_id_for,
)
from app.services.retrieval.embeddings import EmbeddingProvider
from app.utils.exceptions import StaleChunkException
from app.utils.text_utils import join_nonempty, name_key

logger = logging.getLogger(__name__)


class MergeService:
    """Applies parsed extraction records to a graph, one chunk at a time.

    Entities resolve to an existing node by exact normalized name and type, then by
    embedding similarity against same-type nodes. Node vectors are cached here and
    refreshed whenever a node's latest description changes.
    """

    def __init__(self, policy: MergePolicy, embedder: Optional[EmbeddingProvider] = None):
        self.policy = policy
        self.embedder = embedder
        self._vectors: Dict[str, Tuple[str, np.ndarray]] = {}

    def apply_records(
        self, graph: TemporalGraph, chunk: Chunk, records: List[ExtractionRecord]
    ) -> MergeReport:
        report = MergeReport(chunk_id=chunk.chunk_id, anchor=chunk.anchor)
        if chunk.chunk_id in graph.chunks:
            report.skipped = True
            return report
        if graph.latest_anchor is not None and chunk.anchor < graph.latest_anchor:
            if self.policy.strict_ordering:
                raise StaleChunkException(
                    chunk.chunk_id, str(chunk.anchor), str(graph.latest_anchor)
                )
            logger.warning(f"Applying chunk {chunk.chunk_id} out of anchor order")

        keywords: List[str] = []
        for record in records:
            if isinstance(record, KeywordsRec):
                keywords.extend(kw for kw in record.keywords if kw not in keywords)
        merged_keywords = list(chunk.keywords) + [k for k in keywords if k not in chunk.keywords]
        graph.chunks[chunk.chunk_id] = chunk.model_copy(update={"keywords": merged_keywords})

        aliases: Dict[str, str] = {}
        for record in records:
            if isinstance(record, EntityRec):
                node_id = self._apply_entity(graph, chunk, record, report)
                aliases[name_key(record.name)] = node_id
        for record in records:
            if isinstance(record, RelationRec):
                self._apply_relation(graph, chunk, record, aliases, report)

        if graph.latest_anchor is None or chunk.anchor > graph.latest_anchor:
            graph.latest_anchor = chunk.anchor
        graph.revision += 1
        return report

    def _apply_entity(
        self, graph: TemporalGraph, chunk: Chunk, record: EntityRec, report: MergeReport
    ) -> str:
        node = graph.nodes.get(node_id_for(record.entity_type, record.name))
        if node is None:
            node = self._similar_node(graph, record)
        if node is None:
            node = EntityNode(
                node_id=node_id_for(record.entity_type, record.name),
                entity_type=record.entity_type,
                name=record.name,
            )
            graph.nodes[node.node_id] = node
            report.created_nodes.append(node.node_id)
        elif node.node_id not in report.created_nodes and node.node_id not in report.merged_nodes:
            report.merged_nodes.append(node.node_id)

        self._mention(node, chunk)
        if record.description:
            add_description(
                node,
                TimedDescription(
                    timestamp=chunk.anchor, text=record.description, chunk_id=chunk.chunk_id
                ),
            )
        self._update_attributes(node, record.attributes, chunk.anchor, report)
        return node.node_id

    def _similar_node(self, graph: TemporalGraph, record: EntityRec) -> Optional[EntityNode]:
        if self.embedder is None:
            return None
        candidates = sorted(
            node_id
            for node_id, node in graph.nodes.items()
            if node.entity_type == record.entity_type
        )
        if not candidates:
            return None
        query = self.embedder.embed([join_nonempty([f"{record.name}.", record.description])])[0]
        matrix = np.vstack([self._node_vector(graph.nodes[node_id]) for node_id in candidates])
        scores = matrix @ query
        best = int(np.argmax(scores))  # first maximum, so ties go to the smallest id
        if scores[best] >= self.policy.similarity_threshold:
            logger.debug(
                f"Merged {record.name!r} into {graph.nodes[candidates[best]].name!r} "
                f"(cosine {scores[best]:.3f})"
            )
            return graph.nodes[candidates[best]]
        return None

    def _node_vector(self, node: EntityNode) -> np.ndarray:
        text = join_nonempty([f"{node.name}.", node.latest_description()])
        cached = self._vectors.get(node.node_id)
        if cached is None or cached[0] != text:
            cached = (text, self.embedder.embed([text])[0])
            self._vectors[node.node_id] = cached
        return cached[1]

    def _mention(self, node: EntityNode, chunk: Chunk):
        add_timestamp(node, chunk.anchor)
        add_source_chunk(node, chunk.chunk_id)

    def _update_attributes(
        self, node: EntityNode, attributes: Dict[str, str], anchor: Timestamp, report: MergeReport
    ):
        # Most recent non-empty value wins; emptiness never erases.
        for key, value in attributes.items():
            value = value.strip()
            if not value:
                continue
            state = node.attributes.get(key)
            old_value = state.value if state else None
            if state is None:
                node.attributes[key] = AttributeState(
                    history=[AttributeEntry(value=value, updated_at=anchor)]
                )
            elif anchor >= state.updated_at and value != state.value:
                state.history.append(AttributeEntry(value=value, updated_at=anchor))
            else:
                continue
            report.attribute_overwrites.append(
                AttributeOverwrite(
                    node_id=node.node_id,
                    key=key,
                    old_value=old_value,
                    new_value=value,
                    updated_at=anchor,
                )
            )

    def _resolve_endpoint(
        self,
        graph: TemporalGraph,
        name: str,
        aliases: Dict[str, str],
        report: MergeReport,
    ) -> EntityNode:
        node_id = aliases.get(name_key(name))
        if node_id is not None:
            return graph.nodes[node_id]
        node = find_node(graph, name) or self._similar_name(graph, name)
        if node is not None:
            return node
        node = EntityNode(
            node_id=node_id_for(STUB_ENTITY_TYPE, name),
            entity_type=STUB_ENTITY_TYPE,
            name=name,
            stub=True,
        )
        graph.nodes[node.node_id] = node
        aliases[name_key(name)] = node.node_id
        report.stub_nodes.append(node.node_id)
        report.faults.append(f"relationship endpoint {name!r} unresolved; created stub")
        return node

    def _similar_name(self, graph: TemporalGraph, name: str) -> Optional[EntityNode]:
        if self.embedder is None or not graph.nodes:
            return None
        candidates = sorted(graph.nodes)
        vectors = self.embedder.embed([name] + [graph.nodes[n].name for n in candidates])
        scores = vectors[1:] @ vectors[0]
        best = int(np.argmax(scores))
        if scores[best] >= self.policy.similarity_threshold:
            return graph.nodes[candidates[best]]
        return None

    def _apply_relation(
        self,
        graph: TemporalGraph,
        chunk: Chunk,
        record: RelationRec,
        aliases: Dict[str, str],
        report: MergeReport,
    ):
        source = self._resolve_endpoint(graph, record.source, aliases, report)
        target = self._resolve_endpoint(graph, record.target, aliases, report)
        if source.node_id == target.node_id:
            report.faults.append(
                f"relationship {record.source!r} -> {record.target!r} resolves to one node"
            )
            return
        self._mention(source, chunk)
        self._mention(target, chunk)

        edge_id = edge_id_for(source.node_id, target.node_id)
        edge = graph.edges.get(edge_id)
        if edge is None:
            edge = RelationEdge(edge_id=edge_id, source=source.node_id, target=target.node_id)
            graph.edges[edge_id] = edge
            report.created_edges.append(edge_id)
        elif edge_id not in report.created_edges and edge_id not in report.merged_edges:
            report.merged_edges.append(edge_id)

        anchor = chunk.anchor
        add_timestamp(edge, anchor)
        add_description(
            edge,
            TimedDescription(
                timestamp=anchor,
                text=record.description,
                chunk_id=chunk.chunk_id,
                strength=record.strength,
                direction=source.node_id,
            ),
        )
        for keyword in record.keywords:
            first_seen = edge.keywords.get(keyword)
            if first_seen is None or anchor < first_seen:
                edge.keywords[keyword] = anchor
        # Latest observation wins; the newest description carries it.
        latest = next(d for d in reversed(edge.descriptions) if d.strength is not None)
        edge.strength = latest.strength
        edge.strength_updated_at = latest.timestamp


def apply_records(
    graph: TemporalGraph,
    chunk: Chunk,
    records: List[ExtractionRecord],
    policy: MergePolicy,
    embedder: Optional[EmbeddingProvider] = None,
) -> MergeReport:
    return MergeService(policy, embedder).apply_records(graph, chunk, records)

