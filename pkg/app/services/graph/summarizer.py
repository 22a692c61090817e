import logging
from typing import Iterable, Optional, Union

from app.constants.egocentric_schema import SUMMARY_CHUNK_ID
from app.schemas.graph import EntityNode, MergePolicy, RelationEdge, TemporalGraph, TimedDescription
from app.services.llm_clients import Summarizer
from app.utils.exceptions import EngineException, SummarizerFailureException
from app.utils.text_utils import join_nonempty

logger = logging.getLogger(__name__)

GraphElement = Union[EntityNode, RelationEdge]


def element_label(graph: TemporalGraph, element: GraphElement) -> str:
    if isinstance(element, EntityNode):
        return element.name
    names = [
        graph.nodes[node_id].name if node_id in graph.nodes else node_id
        for node_id in (element.source, element.target)
    ]
    return " - ".join(names)


def maybe_summarize(
    element: GraphElement,
    summarizer: Summarizer,
    policy: MergePolicy,
    label: Optional[str] = None,
) -> GraphElement:
    """Collapse all but the newest ``summarize_after`` descriptions into one summary entry.

    Runs only once the element has more than ``summarize_after`` timestamps. The timestamp
    list is never shortened. Returns a new element; the input is left untouched.
    """
    keep = policy.summarize_after
    if len(element.timestamps) <= keep or len(element.descriptions) <= keep:
        return element

    older = element.descriptions[: len(element.descriptions) - keep]
    recent = element.descriptions[len(element.descriptions) - keep :]
    previous = older[0].text if older[0].chunk_id == SUMMARY_CHUNK_ID else ""
    displaced = older[1:] if previous else older
    if not displaced:
        return element
    if label:
        name = label
    else:
        name = element.name if isinstance(element, EntityNode) else element.edge_id
    try:
        text = summarizer.summarize(name, [entry.text for entry in displaced if entry.text])
    except SummarizerFailureException:
        raise
    except EngineException as e:
        raise SummarizerFailureException(f"summarizing {name}: {e.message}")
    except Exception as e:
        raise SummarizerFailureException(f"summarizing {name}: {e}")

    # an earlier summary is kept whole; only newly displaced text is summarized
    text = join_nonempty([previous, text])
    summary = TimedDescription(timestamp=older[0].timestamp, text=text, chunk_id=SUMMARY_CHUNK_ID)
    logger.debug(f"Summarized {len(displaced)} descriptions of {name}")
    return element.model_copy(update={"descriptions": [summary] + list(recent)}, deep=True)


def summarize_graph(
    graph: TemporalGraph,
    summarizer: Summarizer,
    policy: MergePolicy,
    node_ids: Optional[Iterable[str]] = None,
    edge_ids: Optional[Iterable[str]] = None,
) -> int:
    """Apply ``maybe_summarize`` in place to the given elements (all when omitted)."""
    changed = 0
    for node_id in sorted(graph.nodes if node_ids is None else node_ids):
        node = graph.nodes[node_id]
        updated = maybe_summarize(node, summarizer, policy)
        if updated is not node:
            graph.nodes[node_id] = updated
            changed += 1
    for edge_id in sorted(graph.edges if edge_ids is None else edge_ids):
        edge = graph.edges[edge_id]
        updated = maybe_summarize(edge, summarizer, policy, label=element_label(graph, edge))
        if updated is not edge:
            graph.edges[edge_id] = updated
            changed += 1
    if changed:
        graph.revision += 1
    return changed
