import hashlib
import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence

import numpy as np

from app.config import ClientSettings
from app.constants.llm_model import ClientRole
from app.models.enums import ClientProvider
from app.schemas.retrieval import EmbeddingCacheEntry
from app.services.ai_service import get_openai_client
from app.utils.exceptions import ClientFailureException
from app.utils.text_utils import sha256_text, words

logger = logging.getLogger(__name__)

OPENAI_BATCH_SIZE = 256
HASHING_MEMO_SIZE = 4096


class EmbeddingProvider(Protocol):
    dimension: int
    identity: str

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return matrix / norms


class HashingEmbeddingProvider:
    """Seeded feature hashing of lowercased word unigrams and bigrams."""

    def __init__(self, dimension: int = 256, seed: int = 0, memo_size: int = HASHING_MEMO_SIZE):
        if dimension <= 0:
            raise ValueError("Embedding dimension must be positive")
        self.dimension = dimension
        self.seed = seed
        self.identity = f"hashing-d{dimension}-s{seed}"
        # bounded per instance; long batch runs see many distinct query texts
        self._embed_one = lru_cache(maxsize=memo_size)(self._hash_text)

    def _bucket(self, feature: str):
        digest = hashlib.blake2b(f"{self.seed}:{feature}".encode("utf-8"), digest_size=8).digest()
        index = int.from_bytes(digest[:4], "little") % self.dimension
        sign = 1.0 if digest[4] & 1 else -1.0
        return index, sign

    def _hash_text(self, text: str) -> np.ndarray:
        tokens = words(text)
        features = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
        vector = np.zeros(self.dimension, dtype=np.float64)
        for feature in features:
            index, sign = self._bucket(feature)
            vector[index] += sign
        norm = np.linalg.norm(vector)
        if norm > 0:
            vector /= norm
        return vector

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.vstack([self._embed_one(text) for text in texts])


class OpenAIEmbeddingProvider:
    def __init__(self, settings: ClientSettings):
        self.settings = settings
        self.model = settings.model_for(ClientRole.EMBEDDING)
        self.dimension = settings.dimension or 1536
        self.identity = f"openai-{self.model}-d{self.dimension}"
        self._client = None

    @property
    def client(self):
        if self._client is None:
            self._client = get_openai_client(
                ClientRole.EMBEDDING.value,
                base_url=self.settings.base_url,
                timeout=self.settings.timeout_seconds,
                max_retries=self.settings.max_retries,
            )
        return self._client

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        rows: List[List[float]] = []
        for start in range(0, len(texts), OPENAI_BATCH_SIZE):
            batch = list(texts[start : start + OPENAI_BATCH_SIZE])
            try:
                kwargs = {"dimensions": self.settings.dimension} if self.settings.dimension else {}
                response = self.client.embeddings.create(model=self.model, input=batch, **kwargs)
            except ClientFailureException:
                raise
            except Exception as e:
                raise ClientFailureException(f"embedding request failed: {e}")
            rows.extend(item.embedding for item in sorted(response.data, key=lambda d: d.index))
        if not rows:
            return np.zeros((0, self.dimension), dtype=np.float64)
        matrix = np.asarray(rows, dtype=np.float64)
        if not np.all(np.isfinite(matrix)):
            raise ClientFailureException("embedding service returned non-finite values")
        return normalize_rows(matrix)


class CachedEmbeddingProvider:
    """Wraps a provider with an append-only JSON-lines cache keyed by (provider, text hash)."""

    def __init__(self, inner: EmbeddingProvider, path: str):
        self.inner = inner
        self.dimension = inner.dimension
        self.identity = inner.identity
        self.path = Path(path)
        self._cache: Dict[str, np.ndarray] = {}
        self._load()

    def _load(self):
        if not self.path.exists():
            return
        with self.path.open(encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    entry = EmbeddingCacheEntry.model_validate_json(line)
                except ValueError:
                    logger.warning(f"Skipping unreadable embedding cache line {line_no}")
                    continue
                if entry.provider == self.identity and len(entry.vector) == self.dimension:
                    self._cache[entry.text_hash] = np.asarray(entry.vector, dtype=np.float64)
        logger.info(f"Loaded {len(self._cache)} cached embeddings from {self.path}")

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        hashes = [sha256_text(text) for text in texts]
        missing = sorted({h: t for h, t in zip(hashes, texts) if h not in self._cache}.items())
        if missing:
            vectors = self.inner.embed([text for _, text in missing])
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                for (text_hash, _), vector in zip(missing, vectors):
                    self._cache[text_hash] = vector
                    entry = {
                        "provider": self.identity,
                        "text_hash": text_hash,
                        "vector": [float(v) for v in vector],
                    }
                    handle.write(json.dumps(entry) + "\n")
        if not texts:
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.vstack([self._cache[h] for h in hashes])


def build_embedding_provider(
    settings: ClientSettings, cache_path: Optional[str] = None, seed: int = 0
) -> EmbeddingProvider:
    if settings.provider == ClientProvider.OPENAI:
        provider: EmbeddingProvider = OpenAIEmbeddingProvider(settings)
    else:
        provider = HashingEmbeddingProvider(settings.embedding_dimension(), seed=seed)
    if cache_path:
        provider = CachedEmbeddingProvider(provider, cache_path)
    return provider
