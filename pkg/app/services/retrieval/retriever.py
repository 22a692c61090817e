import logging
from typing import Iterable, Optional

from app.models.enums import ElementKind
from app.schemas.graph import TemporalGraph
from app.schemas.retrieval import KeywordResult, RetrievalResult
from app.schemas.timeline import Timestamp
from app.services.graph.views import temporal_filter
from app.services.llm_clients import CompletionClient
from app.services.retrieval.index import RetrievalIndex, top_k
from app.services.retrieval.keywords import extract_keywords
from app.utils.text_utils import join_nonempty

logger = logging.getLogger(__name__)

ALL_COMPONENTS = (ElementKind.NODE, ElementKind.EDGE, ElementKind.CHUNK)


def query_text(query: str, keywords: KeywordResult) -> str:
    return join_nonempty([query, " ".join(keywords.high_level + keywords.low_level)])


def retrieve_context(
    graph: TemporalGraph,
    index: RetrievalIndex,
    query: str,
    t_q: Optional[Timestamp] = None,
    k: int = 40,
    components: Iterable[ElementKind] = ALL_COMPONENTS,
    keyword_client: Optional[CompletionClient] = None,
    view: Optional[TemporalGraph] = None,
) -> RetrievalResult:
    """Top-k nodes, edges and chunks for ``query``, restricted to what was known at ``t_q``.

    ``view`` may carry an already computed ``temporal_filter(graph, t_q)``.
    """
    index.ensure_fresh(graph)
    components = set(components)
    keywords = extract_keywords(query, keyword_client)
    query_vec = index.embed_query(query_text(query, keywords))

    allowed = {kind: None for kind in ElementKind}
    if t_q is not None:
        view = view if view is not None else temporal_filter(graph, t_q)
        allowed = {
            ElementKind.NODE: set(view.nodes),
            ElementKind.EDGE: set(view.edges),
            ElementKind.CHUNK: set(view.chunks),
        }

    ranked = {
        kind: top_k(index, query_vec, k, kind, allowed[kind]) if kind in components else []
        for kind in ElementKind
    }
    logger.debug(
        f"Retrieved {len(ranked[ElementKind.NODE])} nodes, {len(ranked[ElementKind.EDGE])} edges, "
        f"{len(ranked[ElementKind.CHUNK])} chunks at {t_q}"
    )
    return RetrievalResult(
        nodes=ranked[ElementKind.NODE],
        edges=ranked[ElementKind.EDGE],
        chunks=ranked[ElementKind.CHUNK],
        k=k,
        t_q=t_q,
        high_level_keywords=keywords.high_level,
        low_level_keywords=keywords.low_level,
        keyword_fallback=keywords.fallback,
    )
