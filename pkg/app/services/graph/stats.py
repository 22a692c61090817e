from collections import Counter

from app.models.enums import EntityType
from app.schemas.graph import GraphStats, TemporalGraph


def graph_stats(graph: TemporalGraph) -> GraphStats:
    by_type = Counter(node.entity_type.value for node in graph.nodes.values())
    return GraphStats(
        nodes_by_type={entity_type.value: by_type[entity_type.value] for entity_type in EntityType},
        node_count=len(graph.nodes),
        edge_count=len(graph.edges),
        chunk_count=len(graph.chunks),
        node_timestamps=sum(len(node.timestamps) for node in graph.nodes.values()),
        edge_timestamps=sum(len(edge.timestamps) for edge in graph.edges.values()),
        descriptions=sum(len(node.descriptions) for node in graph.nodes.values())
        + sum(len(edge.descriptions) for edge in graph.edges.values()),
        stub_count=sum(1 for node in graph.nodes.values() if node.stub),
    )
