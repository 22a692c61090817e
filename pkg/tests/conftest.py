import random
from typing import Optional

import pytest

from app.config import EngineConfig
from app.models.enums import ClientProvider, EntityType
from app.schemas.documents import Chunk, ChunkSource, Segment, SourceDocument
from app.schemas.extraction import EntityRec, KeywordsRec, RelationRec
from app.schemas.graph import MergePolicy, TemporalGraph
from app.schemas.timeline import Timestamp
from app.services.graph.merge_service import MergeService
from app.services.harness.world import default_world_spec, generate_world
from app.services.retrieval.embeddings import HashingEmbeddingProvider


@pytest.fixture
def config(tmp_path) -> EngineConfig:
    config = EngineConfig()
    for settings in config.client_settings():
        settings.provider = ClientProvider.MOCK
    config.paths.chunk_store = str(tmp_path / "chunks.sqlite")
    config.paths.graph_file = str(tmp_path / "graph.jsonl")
    return config


@pytest.fixture
def embedder() -> HashingEmbeddingProvider:
    return HashingEmbeddingProvider(dimension=64, seed=0)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)


@pytest.fixture(scope="session")
def small_world():
    spec = default_world_spec(seed=3, days=2)
    docs, gold = generate_world(spec)
    return spec, docs, gold


@pytest.fixture
def make_doc():
    """Builds a document from (day, "HH:MM:SS", text) rows."""

    def build(doc_id: str, *rows) -> SourceDocument:
        segments = []
        for day, clock, text in rows:
            hours, minutes, seconds = (int(part) for part in clock.split(":"))
            timestamp = Timestamp.at(day, hours, minutes, seconds)
            segments.append(Segment(timestamp=timestamp, text=text))
        return SourceDocument(doc_id=doc_id, segments=segments)

    return build


PEOPLE = ["Alice", "Bob", "Chen", "Dana"]
PLACES = ["Kitchen", "Garden", "Study"]
THINGS = ["Yellow mug", "Red scarf", "Blue notebook"]
HOMETOWNS = ["Leeds", "Lagos", "Austin"]
COLORS = ["yellow", "red", "blue", "green"]


def random_corpus(rng: random.Random, chunk_count: int, step_choices=(0, 60, 600, 1800)):
    """Seeded (chunk, records) pairs in anchor order.

    Relationships only join names declared in the same chunk, so every node's
    timestamps are exactly the anchors of the chunks declaring it.
    """
    pool = (
        [(name, EntityType.PERSON) for name in PEOPLE]
        + [(name, EntityType.LOCATION) for name in PLACES]
        + [(name, EntityType.OBJECT) for name in THINGS]
    )
    seconds = 8 * 3600 + rng.randint(0, 3600)
    corpus = []
    for index in range(chunk_count):
        seconds += rng.choice(step_choices)
        anchor = Timestamp.from_absolute(seconds)
        declared = rng.sample(pool, k=rng.randint(1, 4))
        records = []
        for name, entity_type in declared:
            attributes = {}
            if entity_type == EntityType.PERSON and rng.random() < 0.4:
                attributes["hometown"] = rng.choice(HOMETOWNS)
            if entity_type == EntityType.OBJECT and rng.random() < 0.4:
                attributes["color"] = rng.choice(COLORS)
            records.append(
                EntityRec(
                    name=name,
                    entity_type=entity_type,
                    description=f"{name} noticed in scene {index}",
                    attributes=attributes,
                )
            )
        for _ in range(rng.randint(0, len(declared) - 1)):
            (source, _), (target, _) = rng.sample(declared, k=2)
            records.append(
                RelationRec(
                    source=source,
                    target=target,
                    description=f"{source} with {target} in scene {index}",
                    keywords=[rng.choice(["presence", "handling", "talk"])],
                    strength=float(rng.randint(1, 10)),
                )
            )
        if rng.random() < 0.5:
            records.append(KeywordsRec(keywords=[name for name, _ in declared]))
        text = " ".join(name for name, _ in declared)
        chunk = Chunk(
            chunk_id=f"c{index:04d}",
            anchor=anchor,
            text=text,
            token_count=len(text.split()),
            source=[ChunkSource(doc_id="scenes", segment_start=index, segment_end=index + 1)],
        )
        corpus.append((chunk, records))
    return corpus


def build_graph(corpus, policy: Optional[MergePolicy] = None, embedder=None) -> TemporalGraph:
    graph = TemporalGraph()
    merger = MergeService(policy or MergePolicy(), embedder)
    for chunk, records in corpus:
        merger.apply_records(graph, chunk, records)
    return graph


@pytest.fixture
def make_corpus():
    return random_corpus


@pytest.fixture
def make_graph():
    return build_graph


@pytest.fixture
def corpus_graph(rng):
    corpus = random_corpus(rng, 80)
    return corpus, build_graph(corpus)
