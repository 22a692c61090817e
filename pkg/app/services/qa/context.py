import logging
import string
from typing import Iterable, List, Optional, Tuple

from app.models.enums import ElementKind
from app.prompts.qa_prompts import MULTIPLE_CHOICE_BLOCK, QA_PROMPT_TEMPLATE, TEMPORAL_RULES_BLOCK
from app.schemas.graph import TemporalGraph
from app.schemas.qa import ChunkContext, ContextPayload, EntityContext, QARequest, RelationContext
from app.schemas.retrieval import RetrievalResult
from app.services.graph.views import temporal_filter
from app.services.llm_clients import CompletionClient
from app.services.retrieval.index import RetrievalIndex
from app.services.retrieval.retriever import ALL_COMPONENTS, retrieve_context
from app.utils.timeline import format_timestamp

logger = logging.getLogger(__name__)

OPTION_LETTERS = string.ascii_uppercase


def payload_from_result(view: TemporalGraph, result: RetrievalResult) -> ContextPayload:
    """Serialize ranked elements of a filtered ``view`` in retrieval order."""
    payload = ContextPayload()
    for scored in result.nodes:
        node = view.nodes[scored.element_id]
        payload.entities.append(
            EntityContext(
                name=node.name,
                type=node.entity_type.value,
                attributes=node.attribute_values(),
                timestamps=[format_timestamp(t) for t in node.timestamps],
                descriptions=[[format_timestamp(d.timestamp), d.text] for d in node.descriptions],
            )
        )
    for scored in result.edges:
        edge = view.edges[scored.element_id]
        payload.relations.append(
            RelationContext(
                source=view.nodes[edge.source].name,
                target=view.nodes[edge.target].name,
                timestamps=[format_timestamp(t) for t in edge.timestamps],
                descriptions=[
                    [format_timestamp(d.timestamp), d.text] for d in edge.descriptions if d.text
                ],
                keywords=sorted(edge.keywords),
            )
        )
    for scored in result.chunks:
        chunk = view.chunks[scored.element_id]
        payload.chunks.append(
            ChunkContext(
                chunk_id=chunk.chunk_id, anchor=format_timestamp(chunk.anchor), text=chunk.text
            )
        )
    return payload


def retrieve_payload(
    graph: TemporalGraph,
    index: RetrievalIndex,
    request: QARequest,
    k: int = 40,
    components: Iterable[ElementKind] = ALL_COMPONENTS,
    keyword_client: Optional[CompletionClient] = None,
) -> Tuple[ContextPayload, RetrievalResult]:
    view = temporal_filter(graph, request.t_q)
    result = retrieve_context(
        graph,
        index,
        request.question,
        t_q=request.t_q,
        k=k,
        components=components,
        keyword_client=keyword_client,
        view=view,
    )
    return payload_from_result(view, result), result


def assemble_context(
    graph: TemporalGraph,
    index: RetrievalIndex,
    request: QARequest,
    k: int = 40,
    components: Iterable[ElementKind] = ALL_COMPONENTS,
    keyword_client: Optional[CompletionClient] = None,
) -> ContextPayload:
    payload, _ = retrieve_payload(graph, index, request, k, components, keyword_client)
    return payload


def format_history(history: List[Tuple[str, str]]) -> str:
    return "\n".join(f"user: {question}\nassistant: {answer}" for question, answer in history)


def format_choices(choices: List[str]) -> str:
    options = "\n".join(f"{OPTION_LETTERS[i]}. {choice}" for i, choice in enumerate(choices))
    return MULTIPLE_CHOICE_BLOCK.format(options=options)


def render_qa_prompt(payload: ContextPayload, request: QARequest) -> str:
    query_time = format_timestamp(request.t_q)
    return QA_PROMPT_TEMPLATE.format(
        temporal_rules=TEMPORAL_RULES_BLOCK,
        query_time=query_time,
        history=format_history(request.history),
        context_data=payload.to_json(),
        response_type=request.response_type,
        user_prompt=request.user_prompt,
        question=request.question,
        choices_block=format_choices(request.choices) if request.choices else "",
    )
