"""Read-only temporal views over a graph.

Views are new graph objects sharing no mutable state with their source; they are
built with ``model_construct`` since every value they hold was validated already.
"""

from typing import Callable, Optional

from app.schemas.graph import (
    AttributeState,
    EntityNode,
    RelationEdge,
    TemporalGraph,
)
from app.schemas.timeline import TimeWindow, Timestamp

TimestampFilter = Callable[[Timestamp], bool]


def _view_node(node: EntityNode, keep: TimestampFilter, cutoff: Optional[Timestamp], chunks):
    timestamps = [t for t in node.timestamps if keep(t)]
    attributes = {}
    for key, state in node.attributes.items():
        history = [e for e in state.history if cutoff is None or e.updated_at <= cutoff]
        if history:
            attributes[key] = AttributeState.model_construct(history=history)
    return EntityNode.model_construct(
        node_id=node.node_id,
        entity_type=node.entity_type,
        name=node.name,
        attributes=attributes,
        timestamps=timestamps,
        descriptions=[d for d in node.descriptions if keep(d.timestamp)],
        source_chunks=[c for c in node.source_chunks if c in chunks],
        stub=node.stub,
    )


def _view_edge(edge: RelationEdge, keep: TimestampFilter, cutoff: Optional[Timestamp]):
    descriptions = [d for d in edge.descriptions if keep(d.timestamp)]
    strength, strength_at = None, None
    for entry in reversed(descriptions):
        if entry.strength is not None:
            strength, strength_at = entry.strength, entry.timestamp
            break
    if strength_at is None and edge.strength_updated_at is not None:
        if keep(edge.strength_updated_at):
            strength, strength_at = edge.strength, edge.strength_updated_at
    return RelationEdge.model_construct(
        edge_id=edge.edge_id,
        source=edge.source,
        target=edge.target,
        timestamps=[t for t in edge.timestamps if keep(t)],
        descriptions=descriptions,
        keywords={k: t for k, t in edge.keywords.items() if cutoff is None or t <= cutoff},
        strength=strength,
        strength_updated_at=strength_at,
    )


def temporal_filter(graph: TemporalGraph, t_q: Timestamp) -> TemporalGraph:
    """Everything observed at or before ``t_q``; elements with no such observation drop out."""

    def keep(t: Timestamp) -> bool:
        return t <= t_q

    chunks = {cid: chunk for cid, chunk in graph.chunks.items() if chunk.anchor <= t_q}
    nodes = {}
    for node_id, node in graph.nodes.items():
        view = _view_node(node, keep, t_q, chunks)
        if view.timestamps:
            nodes[node_id] = view
    edges = {}
    for edge_id, edge in graph.edges.items():
        if edge.source not in nodes or edge.target not in nodes:
            continue
        view = _view_edge(edge, keep, t_q)
        if view.timestamps:
            edges[edge_id] = view
    latest = max((c.anchor for c in chunks.values()), default=None)
    return TemporalGraph.model_construct(
        nodes=nodes,
        edges=edges,
        chunks=chunks,
        entity_schema=graph.entity_schema,
        revision=graph.revision,
        latest_anchor=latest,
    )


def window_query(graph: TemporalGraph, window: TimeWindow) -> TemporalGraph:
    """Edges observed inside the closed window plus their endpoints, restricted to it."""
    keep = window.contains
    edges = {}
    endpoint_ids = set()
    for edge_id, edge in graph.edges.items():
        if not any(keep(t) for t in edge.timestamps):
            continue
        edges[edge_id] = _view_edge(edge, keep, window.end)
        endpoint_ids.update((edge.source, edge.target))
    chunks = {cid: chunk for cid, chunk in graph.chunks.items() if keep(chunk.anchor)}
    nodes = {
        node_id: _view_node(graph.nodes[node_id], keep, window.end, chunks)
        for node_id in sorted(endpoint_ids)
    }
    return TemporalGraph.model_construct(
        nodes=nodes,
        edges=edges,
        chunks=chunks,
        entity_schema=graph.entity_schema,
        revision=graph.revision,
        latest_anchor=max((c.anchor for c in chunks.values()), default=None),
    )


def is_subview(smaller: TemporalGraph, larger: TemporalGraph) -> bool:
    """Element-wise containment of timestamps and descriptions."""
    for node_id, node in smaller.nodes.items():
        other = larger.nodes.get(node_id)
        if other is None or not set(node.timestamps) <= set(other.timestamps):
            return False
        if any(d not in other.descriptions for d in node.descriptions):
            return False
    for edge_id, edge in smaller.edges.items():
        other = larger.edges.get(edge_id)
        if other is None or not set(edge.timestamps) <= set(other.timestamps):
            return False
        if any(d not in other.descriptions for d in edge.descriptions):
            return False
    return True
