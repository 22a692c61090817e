import logging
from typing import Dict, List, Optional

from app.models.models import ChunkRow, ExtractionRow
from app.schemas.documents import Chunk, ChunkSource
from app.schemas.timeline import Timestamp
from app.utils.exceptions import rollback_on_exception

from .base_repository import BaseRepository

logger = logging.getLogger(__name__)


class ChunkRepository(BaseRepository[ChunkRow]):

    def count(self) -> int:
        return self.db.query(ChunkRow).count()

    def get_all(self) -> List[Chunk]:
        rows = self.db.query(ChunkRow).order_by(ChunkRow.seq).all()
        return [self._to_chunk(row) for row in rows]

    def get_by_chunk_id(self, chunk_id: str) -> Optional[Chunk]:
        row = self.db.query(ChunkRow).filter(ChunkRow.chunk_id == chunk_id).first()
        return self._to_chunk(row) if row else None

    @rollback_on_exception
    def replace_all(self, chunks: List[Chunk]) -> int:
        self.db.query(ExtractionRow).delete()
        self.db.query(ChunkRow).delete()
        for seq, chunk in enumerate(chunks):
            self.db.add(
                ChunkRow(
                    chunk_id=chunk.chunk_id,
                    seq=seq,
                    anchor_day=chunk.anchor.day,
                    anchor_seconds=chunk.anchor.seconds_of_day,
                    text=chunk.text,
                    token_count=chunk.token_count,
                    source_json=[source.model_dump() for source in chunk.source],
                )
            )
        self.db.commit()
        logger.info(f"Stored {len(chunks)} chunks")
        return len(chunks)

    def get_completions(self, prompt_hashes: Dict[str, str]) -> Dict[str, str]:
        """Stored completions for ``{chunk_id: prompt_hash}``, keyed by chunk_id."""
        if not prompt_hashes:
            return {}
        rows = (
            self.db.query(ExtractionRow)
            .filter(ExtractionRow.chunk_id.in_(list(prompt_hashes)))
            .all()
        )
        return {
            row.chunk_id: row.completion
            for row in rows
            if prompt_hashes.get(row.chunk_id) == row.prompt_hash
        }

    @rollback_on_exception
    def save_completion(self, chunk_id: str, prompt_hash: str, completion: str, provider: str):
        existing = (
            self.db.query(ExtractionRow)
            .filter(ExtractionRow.chunk_id == chunk_id, ExtractionRow.prompt_hash == prompt_hash)
            .first()
        )
        if existing:
            existing.completion = completion
            existing.provider = provider
        else:
            self.db.add(
                ExtractionRow(
                    chunk_id=chunk_id,
                    prompt_hash=prompt_hash,
                    completion=completion,
                    provider=provider,
                )
            )
        self.db.commit()

    def completion_count(self) -> int:
        return self.db.query(ExtractionRow).count()

    def _to_chunk(self, row: ChunkRow) -> Chunk:
        return Chunk(
            chunk_id=row.chunk_id,
            anchor=Timestamp(day=row.anchor_day, seconds_of_day=row.anchor_seconds),
            text=row.text,
            token_count=row.token_count,
            source=[ChunkSource(**source) for source in row.source_json],
        )
