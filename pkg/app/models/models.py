from sqlalchemy import JSON, Column, Integer, String, Text, UniqueConstraint

from app.database import Base


class ChunkRow(Base):
    __tablename__ = "chunks"

    id = Column(Integer, primary_key=True, autoincrement=True)
    chunk_id = Column(String(64), nullable=False, unique=True, index=True)
    seq = Column(Integer, nullable=False, index=True)  # position in anchor order
    anchor_day = Column(Integer, nullable=False)
    anchor_seconds = Column(Integer, nullable=False)
    text = Column(Text, nullable=False)
    token_count = Column(Integer, nullable=False)
    source_json = Column(JSON, nullable=False)


class ExtractionRow(Base):
    """Raw extraction completion per chunk; doubles as the build checkpoint."""

    __tablename__ = "extractions"
    __table_args__ = (UniqueConstraint("chunk_id", "prompt_hash", name="uq_extraction"),)

    id = Column(Integer, primary_key=True, autoincrement=True)
    chunk_id = Column(String(64), nullable=False, index=True)
    prompt_hash = Column(String(64), nullable=False)
    completion = Column(Text, nullable=False)
    provider = Column(String(32), nullable=False)
