import argparse
import logging

import numpy as np

from app.commands.common import read_lines
from app.config import EngineConfig
from app.services.extraction.chunker import read_segments_jsonl
from app.services.pipeline_service import GraphPipeline

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 5


def register(subparsers):
    parser = subparsers.add_parser("ingest", help="Chunk ingestion JSON-lines into the chunk store")
    parser.add_argument("inputs", nargs="+", help="Segment files ({doc_id, timestamp, text} lines)")
    parser.add_argument("--chunk-store", help="Chunk store file (defaults to paths.chunk_store)")
    parser.set_defaults(handler=run)


def token_histogram(token_counts, l_max: int) -> str:
    counts, edges = np.histogram(token_counts, bins=HISTOGRAM_BINS, range=(1, max(l_max, 2) + 1))
    rows = []
    for count, low, high in zip(counts, edges[:-1], edges[1:]):
        rows.append(f"  {int(np.ceil(low))}-{int(np.ceil(high)) - 1} tokens: {int(count)}")
    return "\n".join(rows)


def run(args: argparse.Namespace, config: EngineConfig) -> int:
    docs = read_segments_jsonl(read_lines(args.inputs))
    chunks = GraphPipeline(config).ingest(docs)
    print(f"{len(chunks)} chunks from {len(docs)} documents")
    print(token_histogram([chunk.token_count for chunk in chunks], config.chunking.l_max))
    return 0
