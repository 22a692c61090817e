"""Graph serialization.

``jsonl`` is the loss-free persistence format (one chunk, node or edge object per line,
read back by ``import_graph``). ``dot`` and ``cypher`` are one-way exports for
visualization and for loading into a property-graph database.
"""

import json
import logging
from typing import Dict, Iterable, List, Union

import networkx as nx
from pydantic import ValidationError

from app.models.enums import ExportFormat
from app.schemas.documents import Chunk, ChunkSource
from app.schemas.extraction import EgocentricSchema
from app.schemas.graph import (
    AttributeEntry,
    AttributeState,
    EntityNode,
    RelationEdge,
    TemporalGraph,
    TimedDescription,
)
from app.schemas.timeline import Timestamp
from app.utils.exceptions import (
    CorruptStreamException,
    EngineException,
    UnsupportedFormatException,
)
from app.utils.timeline import format_timestamp, parse_timestamp

logger = logging.getLogger(__name__)


def _dump(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _chunk_line(chunk: Chunk) -> dict:
    return {
        "kind": "chunk",
        "id": chunk.chunk_id,
        "anchor": format_timestamp(chunk.anchor),
        "text": chunk.text,
        "token_count": chunk.token_count,
        "source": [source.model_dump() for source in chunk.source],
        "keywords": list(chunk.keywords),
    }


def _node_line(node: EntityNode) -> dict:
    return {
        "kind": "node",
        "id": node.node_id,
        "type": node.entity_type.value,
        "name": node.name,
        "attributes": {
            key: {
                "value": state.value,
                "updated_at": format_timestamp(state.updated_at),
                "history": [[e.value, format_timestamp(e.updated_at)] for e in state.history],
            }
            for key, state in sorted(node.attributes.items())
        },
        "timestamps": [format_timestamp(t) for t in node.timestamps],
        "descriptions": [
            [format_timestamp(d.timestamp), d.text, d.chunk_id] for d in node.descriptions
        ],
        "source_chunks": list(node.source_chunks),
        "stub": node.stub,
    }


def _edge_line(edge: RelationEdge) -> dict:
    return {
        "kind": "edge",
        "id": edge.edge_id,
        "source": edge.source,
        "target": edge.target,
        "timestamps": [format_timestamp(t) for t in edge.timestamps],
        "descriptions": [
            [format_timestamp(d.timestamp), d.text, d.chunk_id, d.strength, d.direction]
            for d in edge.descriptions
        ],
        "keywords": {k: format_timestamp(t) for k, t in sorted(edge.keywords.items())},
        "strength": edge.strength,
        "strength_updated_at": (
            format_timestamp(edge.strength_updated_at) if edge.strength_updated_at else None
        ),
    }


def export_jsonl(graph: TemporalGraph) -> str:
    lines = []
    if graph.entity_schema != EgocentricSchema():
        entity_types = {t.value: keys for t, keys in graph.entity_schema.entity_types.items()}
        lines.append(_dump({"kind": "schema", "entity_types": entity_types}))
    lines.extend(_dump(_chunk_line(graph.chunks[cid])) for cid in sorted(graph.chunks))
    lines.extend(_dump(_node_line(graph.nodes[nid])) for nid in sorted(graph.nodes))
    lines.extend(_dump(_edge_line(graph.edges[eid])) for eid in sorted(graph.edges))
    return "".join(line + "\n" for line in lines)


def _dot_quote(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", " ")
    return f'"{escaped}"'


def to_networkx(graph: TemporalGraph) -> nx.Graph:
    nx_graph = nx.Graph()
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        nx_graph.add_node(node_id, label=_dot_quote(f"{node.name}:{node.entity_type.value}"))
    for edge_id in sorted(graph.edges):
        edge = graph.edges[edge_id]
        nx_graph.add_edge(edge.source, edge.target, label=_dot_quote(edge.latest_description()))
    return nx_graph


def export_dot(graph: TemporalGraph) -> str:
    return nx.drawing.nx_pydot.to_pydot(to_networkx(graph)).to_string()


def _cypher_string(value: str) -> str:
    return json.dumps(value, ensure_ascii=False)


def _cypher_label(node: EntityNode) -> str:
    return node.entity_type.value.capitalize()


def export_cypher(graph: TemporalGraph) -> str:
    """CREATE statements; every (edge, timestamp) pair becomes one relationship.

    Relationship ``timestamp`` properties hold formatted timestamp strings, so a
    string-range predicate over them selects the same edges as ``window_query``.
    """
    statements = []
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        stamps = ", ".join(_cypher_string(format_timestamp(t)) for t in node.timestamps)
        statements.append(
            f"CREATE (:{_cypher_label(node)} {{node_id: {_cypher_string(node_id)}, "
            f"name: {_cypher_string(node.name)}, stub: {str(node.stub).lower()}, "
            f"timestamps: [{stamps}]}});"
        )
    for edge_id in sorted(graph.edges):
        edge = graph.edges[edge_id]
        for t in edge.timestamps:
            texts = [d.text for d in edge.descriptions if d.timestamp == t and d.text]
            properties = [
                f"edge_id: {_cypher_string(edge_id)}",
                f"timestamp: {_cypher_string(format_timestamp(t))}",
                f"description: {_cypher_string(' '.join(texts))}",
            ]
            if edge.strength is not None:
                properties.append(f"strength: {float(edge.strength)!r}")
            statements.append(
                f"MATCH (a {{node_id: {_cypher_string(edge.source)}}}), "
                f"(b {{node_id: {_cypher_string(edge.target)}}}) "
                f"CREATE (a)-[:RELATED {{{', '.join(properties)}}}]->(b);"
            )
    return "".join(statement + "\n" for statement in statements)


EXPORTERS = {
    ExportFormat.JSONL: export_jsonl,
    ExportFormat.DOT: export_dot,
    ExportFormat.CYPHER: export_cypher,
}


def export_graph(graph: TemporalGraph, fmt: Union[ExportFormat, str]) -> str:
    if not isinstance(fmt, ExportFormat):
        try:
            fmt = ExportFormat(str(fmt).lower())
        except ValueError:
            raise UnsupportedFormatException(str(fmt))
    return EXPORTERS[fmt](graph)


def _timestamps(values: Iterable[str]) -> List[Timestamp]:
    return [parse_timestamp(value) for value in values]


def _read_chunk(obj: dict) -> Chunk:
    return Chunk(
        chunk_id=obj["id"],
        anchor=parse_timestamp(obj["anchor"]),
        text=obj["text"],
        token_count=obj["token_count"],
        source=[ChunkSource.model_validate(source) for source in obj["source"]],
        keywords=obj.get("keywords", []),
    )


def _read_node(obj: dict) -> EntityNode:
    attributes = {}
    for key, state in obj.get("attributes", {}).items():
        history = state.get("history") or [[state["value"], state["updated_at"]]]
        attributes[key] = AttributeState(
            history=[
                AttributeEntry(value=value, updated_at=parse_timestamp(updated_at))
                for value, updated_at in history
            ]
        )
    return EntityNode(
        node_id=obj["id"],
        entity_type=obj["type"],
        name=obj["name"],
        attributes=attributes,
        timestamps=_timestamps(obj["timestamps"]),
        descriptions=[
            TimedDescription(timestamp=parse_timestamp(ts), text=text, chunk_id=chunk_id)
            for ts, text, chunk_id in obj["descriptions"]
        ],
        source_chunks=obj.get("source_chunks", []),
        stub=obj.get("stub", False),
    )


def _read_edge(obj: dict) -> RelationEdge:
    updated_at = obj.get("strength_updated_at")
    return RelationEdge(
        edge_id=obj["id"],
        source=obj["source"],
        target=obj["target"],
        timestamps=_timestamps(obj["timestamps"]),
        descriptions=[
            TimedDescription(
                timestamp=parse_timestamp(ts),
                text=text,
                chunk_id=chunk_id,
                strength=strength,
                direction=direction,
            )
            for ts, text, chunk_id, strength, direction in obj["descriptions"]
        ],
        keywords={k: parse_timestamp(t) for k, t in obj.get("keywords", {}).items()},
        strength=obj.get("strength"),
        strength_updated_at=parse_timestamp(updated_at) if updated_at else None,
    )


def import_graph(stream: Union[str, bytes]) -> TemporalGraph:
    """Rebuild a graph from ``export_jsonl`` output."""
    if isinstance(stream, bytes):
        try:
            stream = stream.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorruptStreamException(1, f"not UTF-8: {e}")

    graph = TemporalGraph()
    edge_lines: Dict[str, int] = {}
    lines = stream.split("\n")
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line_no == len(lines):
            raise CorruptStreamException(line_no, "truncated line (missing newline)")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorruptStreamException(line_no, f"invalid JSON: {e.msg}")
        if not isinstance(obj, dict):
            raise CorruptStreamException(line_no, "expected a JSON object")
        kind = obj.get("kind")
        try:
            if kind == "schema":
                graph.entity_schema = EgocentricSchema(entity_types=obj["entity_types"])
            elif kind == "chunk":
                chunk = _read_chunk(obj)
                if chunk.chunk_id in graph.chunks:
                    raise CorruptStreamException(line_no, f"duplicate chunk id {chunk.chunk_id}")
                graph.chunks[chunk.chunk_id] = chunk
            elif kind == "node":
                node = _read_node(obj)
                if node.node_id in graph.nodes:
                    raise CorruptStreamException(line_no, f"duplicate node id {node.node_id}")
                graph.nodes[node.node_id] = node
            elif kind == "edge":
                edge = _read_edge(obj)
                if edge.edge_id in graph.edges:
                    raise CorruptStreamException(line_no, f"duplicate edge id {edge.edge_id}")
                graph.edges[edge.edge_id] = edge
                edge_lines[edge.edge_id] = line_no
            else:
                raise CorruptStreamException(line_no, f"unknown line kind {kind!r}")
        except CorruptStreamException:
            raise
        except (KeyError, TypeError, ValueError, ValidationError, EngineException) as e:
            reason = e.message if isinstance(e, EngineException) else str(e)
            raise CorruptStreamException(line_no, f"invalid {kind} record: {reason}")

    for edge_id, edge in graph.edges.items():
        if edge.source not in graph.nodes or edge.target not in graph.nodes:
            raise CorruptStreamException(
                edge_lines[edge_id], f"edge {edge_id} has unknown endpoint"
            )
    graph.latest_anchor = max((c.anchor for c in graph.chunks.values()), default=None)
    logger.debug(
        f"Imported {len(graph.nodes)} nodes, {len(graph.edges)} edges, {len(graph.chunks)} chunks"
    )
    return graph
