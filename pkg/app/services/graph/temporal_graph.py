"""Identity rules and structural helpers for the temporal knowledge graph."""

import bisect
from typing import List, Optional

from app.models.enums import EntityType
from app.schemas.graph import EntityNode, RelationEdge, TemporalGraph, TimedDescription
from app.schemas.timeline import Timestamp
from app.utils.text_utils import name_key, stable_hash
from app.utils.timeline import insert_sorted_unique


def node_id_for(entity_type: EntityType, name: str) -> str:
    return "n_" + stable_hash(entity_type.value, name_key(name))


def edge_id_for(first: str, second: str) -> str:
    low, high = sorted((first, second))
    return "e_" + stable_hash(low, high)


def find_node(graph: TemporalGraph, name: str) -> Optional[EntityNode]:
    """Exact normalized-name lookup across entity types, in schema order."""
    for entity_type in EntityType:
        node = graph.nodes.get(node_id_for(entity_type, name))
        if node is not None:
            return node
    return None


def edge_between(graph: TemporalGraph, first: str, second: str) -> Optional[RelationEdge]:
    return graph.edges.get(edge_id_for(first, second))


def add_timestamp(element, t: Timestamp) -> bool:
    return insert_sorted_unique(element.timestamps, t)


def add_description(element, entry: TimedDescription) -> bool:
    """Insert keeping descriptions ordered by timestamp; exact repeats are ignored."""
    for existing in element.descriptions:
        if (
            existing.chunk_id == entry.chunk_id
            and existing.text == entry.text
            and existing.direction == entry.direction
            and existing.strength == entry.strength
        ):
            return False
    keys = [d.timestamp.key for d in element.descriptions]
    element.descriptions.insert(bisect.bisect_right(keys, entry.timestamp.key), entry)
    return True


def add_source_chunk(node: EntityNode, chunk_id: str):
    index = bisect.bisect_left(node.source_chunks, chunk_id)
    if index == len(node.source_chunks) or node.source_chunks[index] != chunk_id:
        node.source_chunks.insert(index, chunk_id)


def check_integrity(graph: TemporalGraph) -> List[str]:
    """Every violated structural invariant, as human-readable problems."""
    problems = []

    def check_element(label: str, element):
        stamps = element.timestamps
        if any(not a < b for a, b in zip(stamps, stamps[1:])):
            problems.append(f"{label}: timestamps not strictly ascending")
        stamp_set = set(stamps)
        for entry in element.descriptions:
            if entry.timestamp not in stamp_set:
                problems.append(f"{label}: description at {entry.timestamp} has no timestamp")

    for node_id, node in graph.nodes.items():
        label = f"node {node_id}"
        check_element(label, node)
        stamp_set = set(node.timestamps)
        allowed = set(graph.entity_schema.keys_for(node.entity_type))
        for key, state in node.attributes.items():
            if key not in allowed:
                problems.append(f"{label}: attribute {key} outside schema")
            for entry in state.history:
                if entry.updated_at not in stamp_set:
                    problems.append(f"{label}: attribute {key} updated_at {entry.updated_at}")
        for chunk_id in node.source_chunks:
            if chunk_id not in graph.chunks:
                problems.append(f"{label}: unknown chunk {chunk_id}")

    for edge_id, edge in graph.edges.items():
        label = f"edge {edge_id}"
        check_element(label, edge)
        if edge.source not in graph.nodes or edge.target not in graph.nodes:
            problems.append(f"{label}: dangling endpoint")
        if edge.source == edge.target:
            problems.append(f"{label}: self loop")
        if edge_id != edge_id_for(edge.source, edge.target):
            problems.append(f"{label}: id does not match endpoints")
    return problems
