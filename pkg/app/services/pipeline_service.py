"""End-to-end wiring: documents to chunks to graph to retrieval index."""

import asyncio
import logging
import time
from contextlib import contextmanager
from typing import Iterator, List, Optional, Tuple

from sqlalchemy.orm import Session

from app.config import ClientSettings, EngineConfig
from app.constants.llm_model import ClientRole
from app.constants.metrics import Constants
from app.database import create_store_engine, get_session_factory
from app.metrics.statsd_client import statsd
from app.models.enums import ClientProvider
from app.repository.chunk_repository import ChunkRepository
from app.repository.graph_repository import GraphRepository
from app.schemas.documents import Chunk, SourceDocument
from app.schemas.extraction import EgocentricSchema
from app.schemas.graph import BuildSummary, TemporalGraph
from app.schemas.harness import WorldSpec
from app.services.extraction.chunker import chunk_documents
from app.services.extraction.extraction_service import ExtractionService
from app.services.graph.merge_service import MergeService
from app.services.graph.summarizer import summarize_graph
from app.services.harness.mock_extractor import RuleBasedExtractionClient
from app.services.harness.world import load_world_spec
from app.services.llm_clients import (
    CompletionClient,
    FirstSentenceSummarizer,
    LLMSummarizer,
    OpenAIChatClient,
    ScriptedMockClient,
    Summarizer,
)
from app.services.retrieval.embeddings import EmbeddingProvider, build_embedding_provider
from app.services.retrieval.index import RetrievalIndex
from app.utils.exceptions import EmptyInputException

logger = logging.getLogger(__name__)

CHECKPOINT_EVERY = 200


def build_completion_client(
    settings: ClientSettings,
    role: ClientRole,
    config: EngineConfig,
    world: Optional[WorldSpec] = None,
) -> CompletionClient:
    if settings.provider == ClientProvider.OPENAI:
        return OpenAIChatClient(settings, role)
    if role == ClientRole.EXTRACTION:
        world = world or load_world_spec(config.paths.world_spec, seed=config.seed)
        return RuleBasedExtractionClient(world, config.delimiters)
    return ScriptedMockClient()


def build_summarizer(config: EngineConfig) -> Summarizer:
    if config.summarizer.provider == ClientProvider.OPENAI:
        client = OpenAIChatClient(config.summarizer, ClientRole.SUMMARIZER)
        return LLMSummarizer(client, config.language)
    return FirstSentenceSummarizer()


def build_keyword_client(config: EngineConfig) -> Optional[CompletionClient]:
    # without a configured client the heuristic keyword extractor is used
    if config.keywords is None or config.keywords.provider != ClientProvider.OPENAI:
        return None
    return OpenAIChatClient(config.keywords, ClientRole.KEYWORDS)


class GraphPipeline:
    def __init__(
        self,
        config: EngineConfig,
        world: Optional[WorldSpec] = None,
        extraction_client: Optional[CompletionClient] = None,
        embedder: Optional[EmbeddingProvider] = None,
        summarizer: Optional[Summarizer] = None,
    ):
        self.config = config
        self.schema = EgocentricSchema()
        self.extraction_client = extraction_client or build_completion_client(
            config.extraction, ClientRole.EXTRACTION, config, world
        )
        self.embedder = embedder or build_embedding_provider(
            config.embedding, config.paths.embedding_cache, seed=config.seed
        )
        self.summarizer = summarizer or build_summarizer(config)
        self.extraction = ExtractionService(
            self.extraction_client,
            self.schema,
            config.delimiters,
            language=config.language,
            parallelism=config.extraction.parallelism,
        )

    @contextmanager
    def chunk_store(self, fresh: bool = False) -> Iterator[ChunkRepository]:
        engine = create_store_engine(self.config.paths.chunk_store, fresh=fresh)
        db: Session = get_session_factory(engine)()
        try:
            yield ChunkRepository(db)
        finally:
            db.close()
            engine.dispose()

    def chunk(self, docs: List[SourceDocument]) -> List[Chunk]:
        settings = self.config.chunking
        return chunk_documents(docs, settings.l_max, settings.max_segments_per_chunk)

    def ingest(self, docs: List[SourceDocument]) -> List[Chunk]:
        """Chunk ``docs`` and replace the contents of the chunk store."""
        chunks = self.chunk(docs)
        with self.chunk_store(fresh=True) as repo:
            repo.replace_all(chunks)
        return chunks

    def extract(
        self, chunks: List[Chunk], repo: Optional[ChunkRepository] = None
    ) -> List[Tuple[Chunk, str]]:
        self.extraction.chunk_repo = repo
        try:
            return asyncio.run(self.extraction.extract_chunks(chunks))
        finally:
            self.extraction.chunk_repo = None

    def apply(
        self,
        graph: TemporalGraph,
        completions: List[Tuple[Chunk, str]],
        graph_repo: Optional[GraphRepository] = None,
    ) -> BuildSummary:
        """Apply completions in chunk order, then summarize overgrown elements."""
        merger = MergeService(self.config.merge, self.embedder)
        summary = BuildSummary()
        for position, (chunk, completion) in enumerate(completions, start=1):
            parsed = self.extraction.parse(completion)
            with statsd.timed(Constants.Metric.APPLY_LATENCY):
                report = merger.apply_records(graph, chunk, parsed.records)
            summary.add(report)
            summary.parse_faults += len(parsed.faults)
            if graph_repo is not None and position % CHECKPOINT_EVERY == 0:
                graph_repo.save(graph)
                logger.info(f"Checkpointed graph after {position} of {len(completions)} chunks")
        # no-op for elements an earlier run already summarized
        summary.summarized_elements = summarize_graph(graph, self.summarizer, self.config.merge)
        return summary

    def build(self, resume: bool = True) -> Tuple[TemporalGraph, BuildSummary]:
        """Build the graph file from the chunk store, resuming from an existing graph file."""
        graph_repo = GraphRepository(self.config.paths.graph_file)
        graph = graph_repo.load() if resume and graph_repo.exists() else TemporalGraph()
        with self.chunk_store() as repo:
            chunks = repo.get_all()
            if not chunks:
                raise EmptyInputException("chunk store is empty; run ingest first")
            pending = [chunk for chunk in chunks if chunk.chunk_id not in graph.chunks]
            if len(pending) < len(chunks):
                logger.info(f"Resuming build: {len(chunks) - len(pending)} chunks already applied")
            completions = self.extract(pending, repo)
        start_time = time.perf_counter()
        summary = self.apply(graph, completions, graph_repo)
        summary.chunks_skipped += len(chunks) - len(pending)
        graph_repo.save(graph)
        logger.info(
            f"Applied {summary.chunks_applied} chunks in {time.perf_counter() - start_time:.2f}s"
        )
        return graph, summary

    def build_in_memory(self, docs: List[SourceDocument]) -> Tuple[TemporalGraph, BuildSummary]:
        graph = TemporalGraph()
        completions = self.extract(self.chunk(docs))
        return graph, self.apply(graph, completions)

    def index(self, graph: TemporalGraph) -> RetrievalIndex:
        return RetrievalIndex.build(graph, self.embedder)
