import json
import os
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from app.constants.llm_model import (
    DEFAULT_MODELS,
    DEFAULT_TEMPERATURES,
    MOCK_EMBEDDING_DIMENSION,
    ClientRole,
)
from app.models.enums import ClientProvider, ElementKind
from app.schemas.extraction import DelimiterConfig
from app.schemas.graph import MergePolicy
from app.utils.exceptions import ConfigException

# Load environment variables
load_dotenv()

ENV = os.getenv("ENV", "local")

# Secrets never live in the config document
OPENAI_API_KEY = os.getenv("OPENAI_API_KEY")
PORTKEY_API_KEY = os.getenv("PORTKEY_API_KEY")

OPENAI_BASE_URL_OVERRIDE = os.getenv("EGOGRAPH_OPENAI_BASE_URL")
FORCE_MOCK = os.getenv("EGOGRAPH_MOCK", "0") == "1"
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")


class STATSD:
    ENABLED = os.getenv("STATSD_ENABLED", "0") == "1"
    HOST = os.getenv("STATSD_HOST", "localhost")
    PORT = int(os.getenv("STATSD_PORT", 8125))


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ChunkingSettings(_Section):
    l_max: int = Field(default=1200, ge=1)
    max_segments_per_chunk: Optional[int] = Field(default=None, ge=1)


class RetrievalSettings(_Section):
    k: int = Field(default=40, ge=0)
    components: List[ElementKind] = Field(
        default_factory=lambda: [ElementKind.NODE, ElementKind.EDGE, ElementKind.CHUNK]
    )
    # Cosine floor for embedding-based name lookups in the structured resolver.
    match_threshold: float = Field(default=0.5, gt=0.0, le=1.0)

    @field_validator("components")
    @classmethod
    def check_components(cls, value: List[ElementKind]) -> List[ElementKind]:
        if not value:
            raise ValueError("at least one retrieval component is required")
        return sorted(set(value), key=lambda kind: list(ElementKind).index(kind))


class ClientSettings(_Section):
    provider: ClientProvider = ClientProvider.MOCK
    model: Optional[str] = None
    temperature: Optional[float] = None
    base_url: Optional[str] = None
    max_retries: int = Field(default=2, ge=0)
    parallelism: int = Field(default=4, ge=1)
    timeout_seconds: float = Field(default=60.0, gt=0)
    dimension: Optional[int] = Field(default=None, ge=1)

    def model_for(self, role: ClientRole) -> str:
        return self.model or DEFAULT_MODELS[role]

    def temperature_for(self, role: ClientRole) -> float:
        return DEFAULT_TEMPERATURES[role] if self.temperature is None else self.temperature

    def embedding_dimension(self) -> int:
        return self.dimension or MOCK_EMBEDDING_DIMENSION


class PathSettings(_Section):
    chunk_store: str = "egograph_chunks.sqlite"
    graph_file: str = "egograph.jsonl"
    embedding_cache: Optional[str] = None
    # World vocabulary for the rule-based mock extractor; the default world when unset.
    world_spec: Optional[str] = None


class EngineConfig(_Section):
    chunking: ChunkingSettings = Field(default_factory=ChunkingSettings)
    delimiters: DelimiterConfig = Field(default_factory=DelimiterConfig)
    merge: MergePolicy = Field(default_factory=MergePolicy)
    retrieval: RetrievalSettings = Field(default_factory=RetrievalSettings)
    extraction: ClientSettings = Field(default_factory=ClientSettings)
    answering: ClientSettings = Field(default_factory=ClientSettings)
    keywords: Optional[ClientSettings] = None
    summarizer: ClientSettings = Field(default_factory=ClientSettings)
    embedding: ClientSettings = Field(default_factory=ClientSettings)
    paths: PathSettings = Field(default_factory=PathSettings)
    language: str = "English"
    seed: int = 0

    def client_settings(self) -> List[ClientSettings]:
        settings = [self.extraction, self.answering, self.summarizer, self.embedding]
        return settings + ([self.keywords] if self.keywords else [])


def apply_environment_overrides(config: EngineConfig, force_mock: bool = False) -> EngineConfig:
    for settings in config.client_settings():
        if OPENAI_BASE_URL_OVERRIDE:
            settings.base_url = OPENAI_BASE_URL_OVERRIDE
        if FORCE_MOCK or force_mock:
            settings.provider = ClientProvider.MOCK
    return config


def load_engine_config(path: Optional[str] = None, force_mock: bool = False) -> EngineConfig:
    """Read the JSON config document at ``path``; a missing path yields the defaults."""
    if not path:
        return apply_environment_overrides(EngineConfig(), force_mock)
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigException(f"Config file not found: {path}")
    try:
        document = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigException(f"Config file {path} is not valid JSON: {e}")
    try:
        config = EngineConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigException(f"Invalid config {path}: {e}")
    return apply_environment_overrides(config, force_mock)
