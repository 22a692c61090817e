from enum import Enum


class ClientRole(Enum):
    EXTRACTION = "extraction"
    ANSWERING = "answering"
    KEYWORDS = "keywords"
    SUMMARIZER = "summarizer"
    EMBEDDING = "embedding"


DEFAULT_MODELS = {
    ClientRole.EXTRACTION: "gpt-4o",
    ClientRole.ANSWERING: "gpt-4o",
    ClientRole.KEYWORDS: "gpt-4o-mini",
    ClientRole.SUMMARIZER: "gpt-4o-mini",
    ClientRole.EMBEDDING: "text-embedding-3-small",
}

DEFAULT_TEMPERATURES = {
    ClientRole.EXTRACTION: 0.0,
    ClientRole.ANSWERING: 0.0,
    ClientRole.KEYWORDS: 0.0,
    ClientRole.SUMMARIZER: 0.3,
    ClientRole.EMBEDDING: 0.0,
}

MOCK_EMBEDDING_DIMENSION = 256
