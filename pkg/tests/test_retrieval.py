import random

import numpy as np
import pytest

from app.models.enums import ElementKind, EntityType
from app.schemas.documents import Chunk, ChunkSource
from app.schemas.extraction import EntityRec
from app.schemas.graph import MergePolicy
from app.schemas.timeline import Timestamp
from app.services.graph.merge_service import MergeService
from app.services.llm_clients import ScriptedMockClient
from app.services.retrieval.embeddings import CachedEmbeddingProvider, HashingEmbeddingProvider
from app.services.retrieval.index import RetrievalIndex, index_text, top_k
from app.services.retrieval.keywords import extract_keywords, heuristic_keywords
from app.services.retrieval.retriever import retrieve_context
from app.utils.exceptions import DimensionMismatchException, StaleIndexException


class CountingProvider:
    def __init__(self, inner):
        self.inner = inner
        self.dimension = inner.dimension
        self.identity = inner.identity
        self.embedded = 0

    def embed(self, texts):
        self.embedded += len(texts)
        return self.inner.embed(texts)


class NarrowProvider:
    dimension = 64
    identity = "narrow"

    def embed(self, texts):
        return np.ones((len(texts), 32))


def brute_force_ranking(index, query, k, kind, allowed=None):
    ids, _ = index.snapshot(kind)
    unit = query / np.linalg.norm(query)
    scored = [
        (float(np.dot(index.vector(kind, element_id), unit)), element_id)
        for element_id in ids
        if allowed is None or element_id in allowed
    ]
    scored.sort(key=lambda pair: (-round(pair[0], 9), pair[1]))
    return scored[:k]


class TestTopK:
    def test_matches_exhaustive_ranking(self, embedder, make_corpus, make_graph):
        for seed in range(100):
            rng = random.Random(seed)
            graph = make_graph(make_corpus(rng, 30))
            index = RetrievalIndex.build(graph, embedder)
            query = np.random.default_rng(seed).normal(size=embedder.dimension)
            k = rng.randint(1, 15)
            for kind in ElementKind:
                ids, _ = index.snapshot(kind)
                allowed = set(rng.sample(ids, k=len(ids) // 2)) if seed % 2 else None
                expected = brute_force_ranking(index, query, k, kind, allowed)
                ranked = top_k(index, query, k, kind, allowed)
                assert [r.element_id for r in ranked] == [element_id for _, element_id in expected]
                for result, (score, _) in zip(ranked, expected):
                    assert result.score == pytest.approx(score, abs=1e-9)

    def test_ties_break_by_ascending_id(self, embedder, make_corpus, make_graph):
        graph = make_graph(make_corpus(random.Random(5), 10))
        index = RetrievalIndex.build(graph, embedder)
        zero = np.zeros(embedder.dimension)
        ranked = top_k(index, zero, 100, ElementKind.CHUNK)
        assert [r.element_id for r in ranked] == sorted(graph.chunks)
        assert all(r.score == 0.0 for r in ranked)

    def test_k_zero_is_empty(self, corpus_graph, embedder):
        _, graph = corpus_graph
        index = RetrievalIndex.build(graph, embedder)
        assert top_k(index, np.ones(embedder.dimension), 0, ElementKind.NODE) == []

    def test_k_larger_than_index(self, corpus_graph, embedder):
        _, graph = corpus_graph
        index = RetrievalIndex.build(graph, embedder)
        ranked = top_k(index, np.ones(embedder.dimension), 10_000, ElementKind.NODE)
        assert len(ranked) == len(graph.nodes)

    def test_query_dimension_mismatch(self, corpus_graph, embedder):
        _, graph = corpus_graph
        index = RetrievalIndex.build(graph, embedder)
        with pytest.raises(DimensionMismatchException):
            top_k(index, np.ones(embedder.dimension // 2), 5, ElementKind.NODE)

    def test_provider_dimension_mismatch(self, corpus_graph):
        _, graph = corpus_graph
        with pytest.raises(DimensionMismatchException):
            RetrievalIndex.build(graph, NarrowProvider())


class TestIndexMaintenance:
    def test_refresh_only_reembeds_changed_elements(self, embedder, make_corpus, make_graph):
        corpus = make_corpus(random.Random(9), 20)
        graph = make_graph(corpus)
        provider = CountingProvider(embedder)
        index = RetrievalIndex.build(graph, provider)
        total = len(graph.nodes) + len(graph.edges) + len(graph.chunks)
        assert provider.embedded == total
        assert index.refresh(graph) == 0

        last_anchor = corpus[-1][0].anchor
        chunk = Chunk(
            chunk_id="c9999",
            anchor=Timestamp.from_absolute(last_anchor.absolute_seconds + 60),
            text="Alice in the pantry",
            token_count=4,
            source=[ChunkSource(doc_id="scenes", segment_start=20, segment_end=21)],
        )
        records = [
            EntityRec(name="Alice", entity_type=EntityType.PERSON, description="Alice cooks"),
            EntityRec(name="Pantry", entity_type=EntityType.LOCATION, description="A pantry"),
        ]
        report = MergeService(MergePolicy()).apply_records(graph, chunk, records)
        with pytest.raises(StaleIndexException):
            index.ensure_fresh(graph)

        touched = report.created_nodes + report.merged_nodes
        embedded = index.refresh(graph, touched=touched)
        # new chunk, new node and Alice's changed description
        assert embedded == 3
        index.ensure_fresh(graph)
        assert index.size(ElementKind.CHUNK) == len(graph.chunks)

    def test_patched_index_equals_rebuilt_index(self, embedder, make_corpus, make_graph):
        corpus = make_corpus(random.Random(10), 25)
        graph = make_graph(corpus[:10])
        index = RetrievalIndex.build(graph, embedder)
        merger = MergeService(MergePolicy())
        for chunk, records in corpus[10:]:
            report = merger.apply_records(graph, chunk, records)
            touched = (
                report.created_nodes
                + report.merged_nodes
                + report.stub_nodes
                + report.created_edges
                + report.merged_edges
            )
            index.refresh(graph, touched=touched)
        rebuilt = RetrievalIndex.build(graph, embedder)
        for kind in ElementKind:
            ids, matrix = index.snapshot(kind)
            rebuilt_ids, rebuilt_matrix = rebuilt.snapshot(kind)
            assert ids == rebuilt_ids
            assert np.allclose(matrix, rebuilt_matrix)

    def test_edge_text_uses_endpoint_names(self, corpus_graph):
        _, graph = corpus_graph
        edge = next(iter(graph.edges.values()))
        text = index_text(edge, graph)
        assert graph.nodes[edge.source].name in text
        assert graph.nodes[edge.target].name in text


class TestEmbeddingCache:
    def test_hashing_provider_is_unit_and_deterministic(self):
        first = HashingEmbeddingProvider(128, seed=7).embed(["the red scarf", "garden"])
        second = HashingEmbeddingProvider(128, seed=7).embed(["the red scarf", "garden"])
        assert np.array_equal(first, second)
        assert np.allclose(np.linalg.norm(first, axis=1), 1.0)

    def test_hashing_memo_stays_bounded(self):
        provider = HashingEmbeddingProvider(64, seed=3, memo_size=8)
        texts = [f"query number {i}" for i in range(50)]
        vectors = provider.embed(texts)
        assert provider._embed_one.cache_info().currsize <= 8
        fresh = HashingEmbeddingProvider(64, seed=3).embed(texts)
        assert np.array_equal(vectors, fresh)
        assert np.array_equal(provider.embed(texts[:1]), fresh[:1])

    def test_cache_is_reused_across_instances(self, tmp_path, embedder):
        path = tmp_path / "embeddings.jsonl"
        counting = CountingProvider(embedder)
        cached = CachedEmbeddingProvider(counting, str(path))
        vectors = cached.embed(["alpha", "beta", "alpha"])
        assert counting.embedded == 2
        assert len(path.read_text().splitlines()) == 2

        counting = CountingProvider(embedder)
        reloaded = CachedEmbeddingProvider(counting, str(path))
        assert np.allclose(reloaded.embed(["beta", "alpha"]), vectors[[1, 0]])
        assert counting.embedded == 0

    def test_cache_ignores_other_providers_and_bad_lines(self, tmp_path, embedder):
        path = tmp_path / "embeddings.jsonl"
        CachedEmbeddingProvider(embedder, str(path)).embed(["alpha"])
        with path.open("a") as handle:
            handle.write("not json\n")
        counting = CountingProvider(HashingEmbeddingProvider(64, seed=1))
        CachedEmbeddingProvider(counting, str(path)).embed(["alpha"])
        assert counting.embedded == 1


class TestKeywords:
    def test_heuristic_levels(self):
        result = heuristic_keywords("Where did Alice leave the yellow mug?")
        assert result.high_level == ["leave"]
        assert result.low_level == ["Alice", "yellow mug"]

    def test_quoted_phrase_is_low_level(self):
        result = heuristic_keywords('When did I last read "the blue notebook"?')
        assert "the blue notebook" in result.low_level

    def test_blank_query(self):
        result = extract_keywords("   ")
        assert result.high_level == [] and result.low_level == []

    def test_client_reply_is_used(self):
        client = ScriptedMockClient(
            default_reply='Sure: {"high_level_keywords": ["meals"], '
            '"low_level_keywords": ["Yellow mug"]}'
        )
        result = extract_keywords("What did I eat?", client)
        assert result.high_level == ["meals"]
        assert result.low_level == ["Yellow mug"]
        assert not result.fallback
        assert "What did I eat?" in client.calls[0]

    @pytest.mark.parametrize(
        "client",
        [ScriptedMockClient(failure="offline"), ScriptedMockClient(default_reply="no idea")],
    )
    def test_client_problems_fall_back_to_heuristic(self, client):
        result = extract_keywords("Where is the Red scarf?", client)
        assert result.fallback
        assert result.model_copy(update={"fallback": False}) == heuristic_keywords(
            "Where is the Red scarf?"
        )


class TestRetrieveContext:
    def test_no_future_elements(self, corpus_graph, embedder):
        corpus, graph = corpus_graph
        index = RetrievalIndex.build(graph, embedder)
        rng = random.Random(77)
        start = corpus[0][0].anchor.absolute_seconds
        end = corpus[-1][0].anchor.absolute_seconds
        queries = ["Where is the Yellow mug?", "Who talked with Bob?", "garden presence"]
        for _ in range(1000):
            t_q = Timestamp.from_absolute(rng.randint(start - 60, end + 60))
            result = retrieve_context(graph, index, rng.choice(queries), t_q, k=rng.randint(1, 8))
            for scored in result.chunks:
                assert graph.chunks[scored.element_id].anchor <= t_q
            for scored in result.nodes:
                assert graph.nodes[scored.element_id].timestamps[0] <= t_q
            for scored in result.edges:
                assert graph.edges[scored.element_id].timestamps[0] <= t_q

    def test_without_time_everything_is_eligible(self, corpus_graph, embedder):
        _, graph = corpus_graph
        index = RetrievalIndex.build(graph, embedder)
        result = retrieve_context(graph, index, "Alice", k=1000)
        assert len(result.nodes) == len(graph.nodes)
        assert len(result.chunks) == len(graph.chunks)
        assert result.low_level_keywords == ["Alice"]

    def test_components_limit_kinds(self, corpus_graph, embedder):
        _, graph = corpus_graph
        index = RetrievalIndex.build(graph, embedder)
        result = retrieve_context(graph, index, "Alice", k=5, components=[ElementKind.CHUNK])
        assert result.nodes == [] and result.edges == []
        assert len(result.chunks) == 5

    def test_stale_index_is_rejected(self, corpus_graph, embedder):
        _, graph = corpus_graph
        index = RetrievalIndex.build(graph, embedder)
        graph.revision += 1
        with pytest.raises(StaleIndexException):
            retrieve_context(graph, index, "Alice")
