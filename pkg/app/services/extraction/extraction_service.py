import asyncio
import logging
import time
from typing import Dict, List, Optional, Tuple

from app.constants.metrics import Constants
from app.metrics.statsd_client import statsd
from app.repository.chunk_repository import ChunkRepository
from app.schemas.documents import Chunk
from app.schemas.extraction import DelimiterConfig, EgocentricSchema, ExtractionParseResult
from app.services.extraction.prompting import render_extraction_prompt
from app.services.extraction.record_parser import parse_extraction_output
from app.services.llm_clients import CompletionClient
from app.utils.text_utils import sha256_text

logger = logging.getLogger(__name__)


class ExtractionService:
    def __init__(
        self,
        client: CompletionClient,
        schema: EgocentricSchema,
        delimiters: DelimiterConfig,
        language: str = "English",
        parallelism: int = 4,
        chunk_repo: Optional[ChunkRepository] = None,
    ):
        self.client = client
        self.schema = schema
        self.delimiters = delimiters
        self.language = language
        self.parallelism = parallelism
        self.chunk_repo = chunk_repo

    def prompt_for(self, chunk: Chunk) -> str:
        return render_extraction_prompt(chunk, self.schema, self.delimiters, self.language)

    def parse(self, completion: str) -> ExtractionParseResult:
        result = parse_extraction_output(completion, self.delimiters, self.schema)
        if result.faults:
            statsd.increment(Constants.Metric.PARSE_FAULT_COUNT, count=len(result.faults))
        return result

    async def extract_chunks(self, chunks: List[Chunk]) -> List[Tuple[Chunk, str]]:
        """Completions for ``chunks`` in input order; stored completions are reused."""
        prompts = {chunk.chunk_id: self.prompt_for(chunk) for chunk in chunks}
        hashes = {chunk_id: sha256_text(prompt) for chunk_id, prompt in prompts.items()}
        cached: Dict[str, str] = self.chunk_repo.get_completions(hashes) if self.chunk_repo else {}
        if cached:
            logger.info(f"Resuming: {len(cached)} of {len(chunks)} chunks already extracted")

        semaphore = asyncio.Semaphore(self.parallelism)
        tags = {Constants.Tag.PROVIDER: self.client.provider}

        async def limited_extract(chunk: Chunk) -> str:
            if chunk.chunk_id in cached:
                return cached[chunk.chunk_id]
            async with semaphore:
                start_time = time.perf_counter()
                completion = await asyncio.to_thread(self.client.complete, prompts[chunk.chunk_id])
                elapsed_ms = (time.perf_counter() - start_time) * 1000
                statsd.timing(Constants.Metric.EXTRACTION_LATENCY, elapsed_ms, tags=tags)
                statsd.increment(Constants.Metric.EXTRACTION_COUNT, tags=tags)
                logger.debug(f"Extracted chunk {chunk.chunk_id} in {elapsed_ms:.1f}ms")
            # Checkpoint on the event-loop thread; the session is not shared across threads.
            if self.chunk_repo:
                self.chunk_repo.save_completion(
                    chunk.chunk_id, hashes[chunk.chunk_id], completion, self.client.provider
                )
            return completion

        batch_start = time.perf_counter()
        completions = await asyncio.gather(*(limited_extract(chunk) for chunk in chunks))
        elapsed = time.perf_counter() - batch_start
        logger.info(f"Extraction of {len(chunks)} chunks finished in {elapsed:.2f}s")
        return list(zip(chunks, completions))


def extract_chunks(
    chunks: List[Chunk],
    client: CompletionClient,
    schema: EgocentricSchema,
    delimiters: DelimiterConfig,
    **kwargs,
) -> List[Tuple[Chunk, str]]:
    service = ExtractionService(client, schema, delimiters, **kwargs)
    return asyncio.run(service.extract_chunks(chunks))
