import logging
import re
import time
from typing import Iterable, List, Optional

from app.constants.metrics import Constants
from app.metrics.statsd_client import statsd
from app.models.enums import AnswerConfidence, AnswerPath, ElementKind
from app.schemas.graph import TemporalGraph
from app.schemas.qa import Answer, QARequest, SourceRef
from app.schemas.retrieval import RetrievalResult
from app.services.graph.views import temporal_filter
from app.services.llm_clients import CompletionClient
from app.services.qa.context import OPTION_LETTERS, render_qa_prompt, retrieve_payload
from app.services.qa.structured import classify_structured, resolve_structured
from app.services.retrieval.index import RetrievalIndex
from app.services.retrieval.retriever import ALL_COMPONENTS
from app.utils.exceptions import ClientFailureException, UnresolvableException
from app.utils.text_utils import name_key
from app.utils.timeline import find_timestamps

logger = logging.getLogger(__name__)

_LETTER = re.compile(r"^\W*(?:option\s+)?([A-Za-z])\W*$", re.IGNORECASE)
_UNKNOWN = re.compile(r"^\W*(i\s+don'?t\s+know|unknown|not\s+sure|cannot\s+answer)", re.IGNORECASE)


def match_choice(text: str, choices: List[str]) -> Optional[str]:
    """Option letter for a bare letter reply or an option's full text."""
    reply = text.strip()
    letter = _LETTER.match(reply)
    if letter and letter.group(1).upper() in OPTION_LETTERS[: len(choices)]:
        return letter.group(1).upper()
    key = name_key(reply.rstrip("."))
    for i, choice in enumerate(choices):
        if name_key(choice) == key:
            return OPTION_LETTERS[i]
    return None


def _sources(result: RetrievalResult) -> List[SourceRef]:
    refs = []
    for kind in (ElementKind.NODE, ElementKind.EDGE, ElementKind.CHUNK):
        refs.extend(SourceRef(element_id=s.element_id, kind=kind) for s in result.ranked(kind))
    return refs


def _unanswerable(path: AnswerPath, diagnostics: List[str], text: str = "") -> Answer:
    return Answer(
        text=text,
        confidence=AnswerConfidence.UNANSWERABLE,
        path=path,
        diagnostics=diagnostics,
    )


def answer_structured(
    request: QARequest,
    view: TemporalGraph,
    index: RetrievalIndex,
    match_threshold: float,
    diagnostics: List[str],
) -> Optional[Answer]:
    query = classify_structured(request.question)
    if query is None:
        return None
    try:
        result = resolve_structured(query, view, request.t_q, index.provider, match_threshold)
    except UnresolvableException as e:
        diagnostics.append(f"structured path unresolved: {e.message}")
        return None
    if request.choices:
        choice = match_choice(result.text, request.choices)
        if choice is None:
            diagnostics.append(f"structured answer {result.text!r} matches no option")
            return None
        result.choice = choice
    return result


def answer_delegated(
    request: QARequest,
    graph: TemporalGraph,
    index: RetrievalIndex,
    client: CompletionClient,
    diagnostics: List[str],
    k: int = 40,
    components: Iterable[ElementKind] = ALL_COMPONENTS,
    keyword_client: Optional[CompletionClient] = None,
) -> Answer:
    payload, result = retrieve_payload(graph, index, request, k, components, keyword_client)
    if result.keyword_fallback:
        diagnostics.append("keyword client failed; heuristic keywords used")
    if payload.is_empty():
        diagnostics.append(f"no evidence at or before {request.t_q}")
        return _unanswerable(AnswerPath.DELEGATED, diagnostics)

    prompt = render_qa_prompt(payload, request)
    try:
        reply = client.complete(prompt).strip()
    except ClientFailureException as e:
        diagnostics.append(f"answering client failed: {e.message}")
        return _unanswerable(AnswerPath.DELEGATED, diagnostics)

    sources = _sources(result)
    if not reply or _UNKNOWN.match(reply):
        diagnostics.append("answering client gave no answer")
        return _unanswerable(AnswerPath.DELEGATED, diagnostics, text=reply)
    if request.choices:
        choice = match_choice(reply, request.choices)
        if choice is None:
            diagnostics.append(f"reply {reply[:80]!r} names no option")
            return _unanswerable(AnswerPath.DELEGATED, diagnostics, text=reply)
        return Answer(
            text=choice,
            choice=choice,
            sources=sources,
            confidence=AnswerConfidence.DELEGATED,
            path=AnswerPath.DELEGATED,
            diagnostics=diagnostics,
        )
    cited = sorted({t for t in find_timestamps(reply) if t <= request.t_q})
    return Answer(
        text=reply,
        cited_timestamps=cited,
        sources=sources,
        confidence=AnswerConfidence.DELEGATED,
        path=AnswerPath.DELEGATED,
        diagnostics=diagnostics,
    )


def answer(
    request: QARequest,
    graph: TemporalGraph,
    index: RetrievalIndex,
    client: CompletionClient,
    k: int = 40,
    components: Iterable[ElementKind] = ALL_COMPONENTS,
    keyword_client: Optional[CompletionClient] = None,
    match_threshold: float = 0.5,
) -> Answer:
    """Structured resolution first; retrieval plus the answering client otherwise."""
    start_time = time.perf_counter()
    diagnostics: List[str] = []
    view = temporal_filter(graph, request.t_q)
    result = answer_structured(request, view, index, match_threshold, diagnostics)
    if result is None:
        result = answer_delegated(
            request, graph, index, client, diagnostics, k, components, keyword_client
        )
    elapsed_ms = (time.perf_counter() - start_time) * 1000
    tags = {Constants.Tag.PATH: result.path.value, Constants.Tag.OUTCOME: result.confidence.value}
    statsd.timing(Constants.Metric.ANSWER_LATENCY, elapsed_ms, tags=tags)
    statsd.increment(Constants.Metric.ANSWER_COUNT, tags=tags)
    logger.info(
        f"Answered via {result.path.value} ({result.confidence.value}) in {elapsed_ms:.1f}ms"
    )
    return result
