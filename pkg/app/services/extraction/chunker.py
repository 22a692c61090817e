"""Token-budgeted chunking of timestamped documents with temporal anchoring."""

import json
import logging
from typing import Iterable, List, Optional, Tuple

from pydantic import ValidationError

from app.schemas.documents import Chunk, ChunkSource, Segment, SourceDocument
from app.utils.exceptions import EmptyInputException, EngineException, MalformedInputException
from app.utils.text_utils import stable_hash
from app.utils.timeline import parse_timestamp

logger = logging.getLogger(__name__)


def count_tokens(text: str) -> int:
    return len(text.split())


def _hard_split(text: str, l_max: int) -> List[str]:
    tokens = text.split()
    return [" ".join(tokens[i : i + l_max]) for i in range(0, len(tokens), l_max)]


def _make_chunk(doc_id: str, pieces: List[Tuple[int, Segment, str]], part: int) -> Chunk:
    first_index = pieces[0][0]
    last_index = pieces[-1][0]
    text = "\n".join(piece for _, _, piece in pieces)
    source = ChunkSource(
        doc_id=doc_id, segment_start=first_index, segment_end=last_index + 1, part=part
    )
    chunk_id = "c_" + stable_hash(
        doc_id, str(first_index), str(last_index + 1), str(part), text, length=20
    )
    return Chunk(
        chunk_id=chunk_id,
        # Segments are non-decreasing within a document, so the first one is the earliest.
        anchor=pieces[0][1].timestamp,
        text=text,
        token_count=count_tokens(text),
        source=[source],
    )


def _chunk_document(doc: SourceDocument, l_max: int, max_segments: Optional[int]) -> List[Chunk]:
    chunks: List[Chunk] = []
    pending: List[Tuple[int, Segment, str]] = []
    pending_tokens = 0

    def flush():
        nonlocal pending, pending_tokens
        if pending:
            chunks.append(_make_chunk(doc.doc_id, pending, part=0))
        pending, pending_tokens = [], 0

    for index, segment in enumerate(doc.segments):
        tokens = count_tokens(segment.text)
        if tokens == 0:
            continue
        if tokens > l_max:
            flush()
            for part, piece in enumerate(_hard_split(segment.text, l_max)):
                chunks.append(_make_chunk(doc.doc_id, [(index, segment, piece)], part=part))
            continue
        full = max_segments is not None and len(pending) >= max_segments
        if pending and (pending_tokens + tokens > l_max or full):
            flush()
        pending.append((index, segment, segment.text.strip()))
        pending_tokens += tokens
    flush()
    return chunks


def chunk_documents(
    docs: List[SourceDocument], l_max: int, max_segments_per_chunk: Optional[int] = None
) -> List[Chunk]:
    """Greedy packing in document order; output ordered by (anchor, document order)."""
    if l_max < 1:
        raise ValueError("l_max must be positive")
    ordered = []
    for doc_index, doc in enumerate(docs):
        for seq, chunk in enumerate(_chunk_document(doc, l_max, max_segments_per_chunk)):
            ordered.append((chunk.anchor, doc_index, seq, chunk))
    if not ordered:
        raise EmptyInputException()
    ordered.sort(key=lambda item: (item[0].key, item[1], item[2]))
    chunks = [item[3] for item in ordered]
    logger.info(f"Chunked {len(docs)} documents into {len(chunks)} chunks (l_max={l_max})")
    return chunks


def read_segments_jsonl(lines: Iterable[str]) -> List[SourceDocument]:
    """Group ingestion lines by doc_id in order of first appearance."""
    grouped = {}
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedInputException(line_no, f"invalid JSON ({e.msg})")
        if not isinstance(row, dict):
            raise MalformedInputException(line_no, "expected a JSON object")
        missing = [key for key in ("doc_id", "timestamp", "text") if key not in row]
        if missing:
            raise MalformedInputException(line_no, f"missing {', '.join(missing)}")
        try:
            timestamp = parse_timestamp(str(row["timestamp"]))
        except EngineException as e:
            raise MalformedInputException(line_no, e.message)
        doc_id = str(row["doc_id"])
        grouped.setdefault(doc_id, []).append(Segment(timestamp=timestamp, text=str(row["text"])))

    if not grouped:
        raise EmptyInputException()
    documents = []
    for doc_id, segments in grouped.items():
        try:
            documents.append(SourceDocument(doc_id=doc_id, segments=segments))
        except ValidationError as e:
            raise MalformedInputException(0, f"document {doc_id}: {e.errors()[0]['msg']}")
    return documents


def write_segments_jsonl(docs: List[SourceDocument]) -> str:
    lines = []
    for doc in docs:
        for segment in doc.segments:
            row = {"doc_id": doc.doc_id, "timestamp": str(segment.timestamp), "text": segment.text}
            lines.append(json.dumps(row, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")
