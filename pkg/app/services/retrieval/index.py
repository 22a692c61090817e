"""Exact cosine index over graph nodes, edges and chunks."""

import hashlib
import logging
from typing import Dict, Iterable, List, Optional, Set, Union

import numpy as np

from app.models.enums import ElementKind
from app.schemas.documents import Chunk
from app.schemas.graph import EntityNode, RelationEdge, TemporalGraph
from app.schemas.retrieval import ScoredElement
from app.services.retrieval.embeddings import EmbeddingProvider, normalize_rows
from app.utils.exceptions import DimensionMismatchException, StaleIndexException
from app.utils.text_utils import join_nonempty

logger = logging.getLogger(__name__)

Element = Union[EntityNode, RelationEdge, Chunk]


def _sentence(text: str) -> str:
    text = text.strip()
    return text if not text or text.endswith(".") else f"{text}."


def index_text(element: Element, graph: Optional[TemporalGraph] = None) -> str:
    """The text embedded for an element."""
    if isinstance(element, Chunk):
        return element.text
    if isinstance(element, EntityNode):
        attributes = " ".join(
            f"{key}:{value}" for key, value in sorted(element.attribute_values().items())
        )
        return join_nonempty(
            [
                _sentence(element.name),
                _sentence(element.entity_type.value),
                _sentence(element.latest_description()),
                attributes,
            ]
        )
    names = []
    for node_id in (element.source, element.target):
        node = graph.nodes.get(node_id) if graph is not None else None
        names.append(node.name if node else node_id)
    return join_nonempty(
        [
            _sentence(" - ".join(names)),
            _sentence(", ".join(sorted(element.keywords))),
            _sentence(element.latest_description()),
        ]
    )


def fingerprint(text: str) -> str:
    return hashlib.sha1(text.encode("utf-8")).hexdigest()


class _KindStore:
    def __init__(self, dimension: int):
        self.dimension = dimension
        self.vectors: Dict[str, np.ndarray] = {}
        self.fingerprints: Dict[str, str] = {}
        self._ids: Optional[List[str]] = None
        self._matrix: Optional[np.ndarray] = None

    def put(self, element_id: str, vector: np.ndarray, digest: str):
        self.vectors[element_id] = vector
        self.fingerprints[element_id] = digest
        self._ids = None

    def drop(self, element_id: str):
        self.vectors.pop(element_id, None)
        self.fingerprints.pop(element_id, None)
        self._ids = None

    def snapshot(self):
        if self._ids is None:
            self._ids = sorted(self.vectors)
            if self._ids:
                self._matrix = np.vstack([self.vectors[i] for i in self._ids])
            else:
                self._matrix = np.zeros((0, self.dimension), dtype=np.float64)
        return self._ids, self._matrix


class RetrievalIndex:
    """One unit vector per live element and kind, plus the graph revision it reflects.

    ``refresh`` re-embeds only elements whose index text changed, so it doubles as a
    patch update after each applied chunk and as a full build on an empty index.
    """

    def __init__(self, provider: EmbeddingProvider):
        self.provider = provider
        self.dimension = provider.dimension
        self.revision: Optional[int] = None
        self._stores = {kind: _KindStore(self.dimension) for kind in ElementKind}

    @classmethod
    def build(cls, graph: TemporalGraph, provider: EmbeddingProvider) -> "RetrievalIndex":
        index = cls(provider)
        index.refresh(graph)
        return index

    def _elements(self, graph: TemporalGraph, kind: ElementKind) -> Dict[str, Element]:
        if kind == ElementKind.NODE:
            return graph.nodes
        if kind == ElementKind.EDGE:
            return graph.edges
        return graph.chunks

    def refresh(self, graph: TemporalGraph, touched: Optional[Iterable[str]] = None) -> int:
        """Bring the index to ``graph.revision``; returns the number of re-embedded elements.

        With ``touched``, only those ids plus elements unknown to the index are checked.
        """
        touched_ids: Optional[Set[str]] = set(touched) if touched is not None else None
        embedded = 0
        for kind in ElementKind:
            store = self._stores[kind]
            elements = self._elements(graph, kind)
            for stale_id in [i for i in store.vectors if i not in elements]:
                store.drop(stale_id)
            pending = []
            for element_id in sorted(elements):
                known = element_id in store.fingerprints
                if known and touched_ids is not None and element_id not in touched_ids:
                    continue
                text = index_text(elements[element_id], graph)
                digest = fingerprint(text)
                if store.fingerprints.get(element_id) != digest:
                    pending.append((element_id, text, digest))
            if pending:
                vectors = self.provider.embed([text for _, text, _ in pending])
                self._check_dimension(vectors)
                vectors = normalize_rows(np.asarray(vectors, dtype=np.float64))
                for (element_id, _, digest), vector in zip(pending, vectors):
                    store.put(element_id, vector, digest)
                embedded += len(pending)
        self.revision = graph.revision
        if embedded:
            logger.debug(f"Index refreshed to revision {graph.revision}: {embedded} re-embedded")
        return embedded

    def _check_dimension(self, vectors: np.ndarray):
        if vectors.ndim != 2 or vectors.shape[1] != self.dimension:
            actual = vectors.shape[-1] if vectors.ndim else 0
            raise DimensionMismatchException(self.dimension, int(actual))

    def ensure_fresh(self, graph: TemporalGraph):
        if self.revision != graph.revision:
            raise StaleIndexException(self.revision, graph.revision)

    def size(self, kind: ElementKind) -> int:
        return len(self._stores[kind].vectors)

    def vector(self, kind: ElementKind, element_id: str) -> Optional[np.ndarray]:
        return self._stores[kind].vectors.get(element_id)

    def embed_query(self, text: str) -> np.ndarray:
        vector = np.asarray(self.provider.embed([text])[0], dtype=np.float64)
        norm = np.linalg.norm(vector)
        return vector / norm if norm > 0 else vector

    def snapshot(self, kind: ElementKind):
        return self._stores[kind].snapshot()


def top_k(
    index: RetrievalIndex,
    query_vec: np.ndarray,
    k: int,
    kind: ElementKind,
    allowed_ids: Optional[Set[str]] = None,
) -> List[ScoredElement]:
    """Exact cosine ranking: descending score, ties by ascending id, at most ``k`` results."""
    query = np.asarray(query_vec, dtype=np.float64).reshape(-1)
    if query.shape[0] != index.dimension:
        raise DimensionMismatchException(index.dimension, int(query.shape[0]))
    if k <= 0:
        return []
    ids, matrix = index.snapshot(kind)
    if allowed_ids is not None:
        positions = [i for i, element_id in enumerate(ids) if element_id in allowed_ids]
        ids = [ids[i] for i in positions]
        matrix = matrix[positions]
    if not ids:
        return []
    norm = np.linalg.norm(query)
    scores = matrix @ (query / norm if norm > 0 else query)
    # ids are ascending, so position breaks score ties by id
    order = np.lexsort((np.arange(len(ids)), -scores))[:k]
    return [ScoredElement(element_id=ids[i], score=float(scores[i])) for i in order]
