import asyncio
import random
import string

import pytest

from app.database import create_store_engine, get_session_factory
from app.models.enums import EntityType
from app.repository.chunk_repository import ChunkRepository
from app.schemas.extraction import (
    DelimiterConfig,
    EgocentricSchema,
    EntityRec,
    KeywordsRec,
    RelationRec,
)
from app.services.extraction.chunker import (
    chunk_documents,
    count_tokens,
    read_segments_jsonl,
    write_segments_jsonl,
)
from app.services.extraction.extraction_service import ExtractionService, extract_chunks
from app.services.extraction.prompting import render_extraction_prompt
from app.services.extraction.record_parser import (
    parse_attributes,
    parse_extraction_output,
    serialize_record,
    serialize_records,
    split_records,
)
from app.services.llm_clients import ScriptedMockClient
from app.utils.exceptions import (
    EXIT_USAGE,
    EmptyInputException,
    MalformedInputException,
    RecordSerializationException,
)

DELIMITERS = DelimiterConfig()
SCHEMA = EgocentricSchema()


class TestChunker:
    def test_packs_segments_under_budget(self, make_doc):
        doc = make_doc(
            "d1",
            (1, "08:00:00", "one two three"),
            (1, "08:02:00", "four five"),
            (1, "08:04:00", "six seven eight nine"),
        )
        chunks = chunk_documents([doc], l_max=5)
        assert [chunk.text for chunk in chunks] == [
            "one two three\nfour five",
            "six seven eight nine",
        ]
        assert [str(chunk.anchor) for chunk in chunks] == ["[DAY1 08:00:00]", "[DAY1 08:04:00]"]
        assert all(chunk.token_count <= 5 for chunk in chunks)

    def test_oversized_segment_is_hard_split(self, make_doc):
        doc = make_doc("d1", (1, "09:00:00", " ".join(f"w{i}" for i in range(7))))
        chunks = chunk_documents([doc], l_max=3)
        assert [chunk.token_count for chunk in chunks] == [3, 3, 1]
        assert [chunk.source[0].part for chunk in chunks] == [0, 1, 2]
        assert len({chunk.chunk_id for chunk in chunks}) == 3

    def test_max_segments_per_chunk(self, make_doc):
        doc = make_doc("d1", (1, "08:00:00", "a"), (1, "08:00:05", "b"), (1, "08:00:10", "c"))
        chunks = chunk_documents([doc], l_max=100, max_segments_per_chunk=1)
        assert [chunk.anchor.seconds_of_day for chunk in chunks] == [28800, 28805, 28810]

    def test_mixed_day_inputs_are_ordered_by_anchor(self, make_doc):
        later = make_doc("later", (2, "10:00:00", "second day"))
        earlier = make_doc("earlier", (1, "10:00:00", "first day"), (1, "11:00:00", "more"))
        chunks = chunk_documents([later, earlier], l_max=2)
        anchors = [chunk.anchor for chunk in chunks]
        assert anchors == sorted(anchors)
        assert chunks[-1].text == "second day"

    def test_chunking_is_deterministic(self, small_world):
        _, docs, _ = small_world
        first = chunk_documents(docs, l_max=40)
        second = chunk_documents(docs, l_max=40)
        assert [c.chunk_id for c in first] == [c.chunk_id for c in second]

    def test_chunk_count_matches_recount(self, small_world):
        _, docs, _ = small_world
        chunks = chunk_documents(docs, l_max=1200, max_segments_per_chunk=1)
        segments = sum(1 for doc in docs for s in doc.segments if count_tokens(s.text))
        assert len(chunks) == segments

    def test_blank_segments_only_is_empty_input(self, make_doc):
        with pytest.raises(EmptyInputException) as caught:
            chunk_documents([make_doc("d1", (1, "08:00:00", "   "))], l_max=10)
        assert caught.value.message == "no segments"


class TestSegmentsJsonl:
    def test_groups_by_doc_in_first_appearance_order(self, small_world):
        _, docs, _ = small_world
        parsed = read_segments_jsonl(write_segments_jsonl(docs).splitlines())
        assert [doc.doc_id for doc in parsed] == [doc.doc_id for doc in docs]
        assert parsed[0].segments == docs[0].segments

    @pytest.mark.parametrize(
        "line,reason",
        [
            ("not json", "invalid JSON"),
            ('["a"]', "expected a JSON object"),
            ('{"doc_id": "d", "text": "x"}', "missing timestamp"),
            ('{"doc_id": "d", "timestamp": "[DAY0 01:00:00]", "text": "x"}', "out of range"),
        ],
    )
    def test_malformed_lines_carry_line_numbers(self, line, reason):
        good = '{"doc_id": "d", "timestamp": "[DAY1 08:00:00]", "text": "ok"}'
        with pytest.raises(MalformedInputException) as caught:
            read_segments_jsonl([good, line])
        assert caught.value.line_no == 2
        assert reason in caught.value.message
        assert caught.value.exit_code == EXIT_USAGE

    def test_empty_file(self):
        with pytest.raises(EmptyInputException):
            read_segments_jsonl(["", "  "])


def _entity(name="Alice", entity_type=EntityType.PERSON, **attributes):
    return EntityRec(
        name=name, entity_type=entity_type, description=f"{name} is here", attributes=attributes
    )


class TestRecordParser:
    def test_parses_all_record_kinds(self):
        text = serialize_records(
            [
                _entity(gender="female"),
                _entity("Kitchen", EntityType.LOCATION),
                RelationRec(
                    source="Alice",
                    target="Kitchen",
                    description="Alice cooks in the kitchen",
                    keywords=["cooking", "presence"],
                    strength=6.5,
                ),
                KeywordsRec(keywords=["breakfast", "kitchen"]),
            ],
            DELIMITERS,
        )
        result = parse_extraction_output(text, DELIMITERS, SCHEMA)
        assert not result.faults
        assert [record.kind.value for record in result.records] == [
            "entity",
            "entity",
            "relationship",
            "content_keywords",
        ]
        assert result.records[0].attributes == {"gender": "female"}
        assert result.records[2].strength == 6.5

    def test_stops_at_completion_delimiter(self):
        text = serialize_records([_entity()], DELIMITERS) + '\n##\n("entity"<|>Bob<|>person)'
        assert len(split_records(text, DELIMITERS)) == 1

    @pytest.mark.parametrize(
        "record,reason",
        [
            ('"entity"<|>Alice<|>person<|>d<|>', "not parenthesized"),
            ("(entity<|>Alice<|>person<|>d<|>)", "not quoted"),
            ('("thing"<|>Alice)', "unknown record tag"),
            ('("entity"<|>Alice<|>person<|>d)', "expected 4"),
            ('("entity"<|>Alice<|>robot<|>d<|>)', "unknown entity type"),
            ('("relationship"<|>A<|>a<|>d<|>k<|>5)', "self relationship"),
            ('("relationship"<|>A<|>B<|>d<|>k<|>strong)', "not a number"),
            ('("relationship"<|>A<|>B<|>d<|>k<|>nan)', "not finite"),
        ],
    )
    def test_malformed_records_become_faults(self, record, reason):
        good = serialize_record(_entity(), DELIMITERS)
        result = parse_extraction_output(f"{good}##{record}", DELIMITERS, SCHEMA)
        assert len(result.records) == 1
        assert len(result.faults) == 1
        assert result.faults[0].record_index == 1
        assert reason in result.faults[0].reason

    def test_names_are_whitespace_normalized(self):
        result = parse_extraction_output(
            '("entity"<|>  Alice   Smith <|>person<|>d<|>)', DELIMITERS, SCHEMA
        )
        assert result.records[0].name == "Alice Smith"

    def test_attribute_problems_are_warnings(self):
        faults = []
        attributes = parse_attributes("gender:female|mood:happy|hometown", ["gender"], faults)
        assert attributes == {"gender": "female"}
        assert len(faults) == 2

    def test_none_attribute_is_dropped(self):
        assert parse_attributes("gender:None|hometown:Leeds", ["gender", "hometown"]) == {
            "hometown": "Leeds"
        }

    def test_event_start_time_is_canonicalized(self):
        record = '("entity"<|>Breakfast<|>event<|>d<|>start_time:[Day2, 08:00:00])'
        result = parse_extraction_output(record, DELIMITERS, SCHEMA)
        assert result.records[0].attributes["start_time"] == "[DAY2 08:00:00]"

    def test_serializer_rejects_delimiters_in_fields(self):
        with pytest.raises(RecordSerializationException):
            serialize_record(_entity(name="Al<|>ice"), DELIMITERS)

    def test_custom_delimiters(self):
        config = DelimiterConfig(
            tuple_delimiter="%%", record_delimiter="@@", completion_delimiter="<END>"
        )
        text = serialize_records([_entity(), KeywordsRec(keywords=["x"])], config)
        assert len(parse_extraction_output(text, config, SCHEMA).records) == 2

    def test_overlapping_delimiters_rejected(self):
        with pytest.raises(ValueError):
            DelimiterConfig(tuple_delimiter="##", record_delimiter="#")


def _random_word(rng: random.Random) -> str:
    return "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(3, 8)))


def _random_record(rng: random.Random):
    kind = rng.randrange(3)
    if kind == 0:
        return EntityRec(
            name=_random_word(rng).title(),
            entity_type=EntityType.OBJECT,
            description=f"{_random_word(rng)} {_random_word(rng)}",
            attributes={"color": "c" + _random_word(rng)},
        )
    if kind == 1:
        return RelationRec(
            source="A" + _random_word(rng),
            target="B" + _random_word(rng),
            description=_random_word(rng),
            keywords=[_random_word(rng) for _ in range(rng.randint(1, 3))],
            strength=round(rng.uniform(0, 10), 3),
        )
    return KeywordsRec(keywords=[_random_word(rng) for _ in range(rng.randint(1, 4))])


MUTATIONS = [
    lambda text, rng: text[: rng.randrange(len(text) + 1)],
    lambda text, rng: text.replace("<|>", "<|", 1),
    lambda text, rng: text.replace("(", "", 1),
    lambda text, rng: text.replace('"', "", 2),
    lambda text, rng: text + "<|>extra",
    lambda text, rng: text.replace(")", ")##junk", 1),
    lambda text, rng: "".join(rng.sample(text, len(text))),
    lambda text, rng: text.replace("object", rng.choice(["robot", "OBJECT", " object "]), 1),
    lambda text, rng: text,
]


def test_fuzzed_records_conserve_count(rng):
    for _ in range(100_000):
        text = serialize_record(_random_record(rng), DELIMITERS)
        mutated = rng.choice(MUTATIONS)(text, rng)
        result = parse_extraction_output(mutated, DELIMITERS, SCHEMA)
        pieces = split_records(mutated, DELIMITERS)
        assert len(result.records) + len(result.faults) == len(pieces)


def test_valid_records_round_trip(rng):
    for _ in range(2_000):
        records = [_random_record(rng) for _ in range(rng.randint(1, 5))]
        result = parse_extraction_output(serialize_records(records, DELIMITERS), DELIMITERS, SCHEMA)
        assert not result.faults
        assert result.records == records


def _noisy_text(rng: random.Random) -> str:
    return "".join(rng.choice(string.ascii_lowercase + '"  ') for _ in range(rng.randint(0, 8)))


def test_quoted_fields_round_trip_or_are_rejected(rng):
    round_trips = rejected = 0
    for _ in range(2_000):
        record = RelationRec(
            source="A" + _random_word(rng),
            target="B" + _random_word(rng),
            description=_noisy_text(rng),
            keywords=[_noisy_text(rng) for _ in range(rng.randint(1, 3))],
            strength=1.0,
        )
        try:
            text = serialize_records([record], DELIMITERS)
        except RecordSerializationException:
            fields = [record.description] + record.keywords
            assert any(f != f.strip().strip('"').strip() for f in fields) or "" in record.keywords
            rejected += 1
            continue
        result = parse_extraction_output(text, DELIMITERS, SCHEMA)
        assert result.records == [record]
        round_trips += 1
    assert round_trips and rejected


@pytest.mark.parametrize(
    "record",
    [
        RelationRec(source="A", target="B", description='"Hi" said John', strength=1.0),
        RelationRec(source="A", target="B", description="d ", strength=1.0),
        RelationRec(source="A", target="B", description="d", keywords=[""], strength=1.0),
        _entity(name=" Alice"),
        _entity(gender="None"),
    ],
)
def test_serializer_rejects_fields_the_parser_would_change(record):
    with pytest.raises(RecordSerializationException):
        serialize_record(record, DELIMITERS)


class TestExtractionService:
    def test_completions_keep_chunk_order(self, small_world):
        _, docs, _ = small_world
        chunks = chunk_documents(docs, l_max=30)[:12]
        client = ScriptedMockClient(default_reply=DELIMITERS.completion_delimiter)
        results = extract_chunks(chunks, client, SCHEMA, DELIMITERS, parallelism=3)
        assert [chunk.chunk_id for chunk, _ in results] == [chunk.chunk_id for chunk in chunks]
        assert len(client.calls) == len(chunks)

    def test_prompt_carries_anchor_and_schema(self, small_world):
        _, docs, _ = small_world
        chunk = chunk_documents(docs, l_max=30)[0]
        service = ExtractionService(ScriptedMockClient(), SCHEMA, DELIMITERS)
        prompt = service.prompt_for(chunk)
        assert str(chunk.anchor) in prompt
        assert "purchase_information" in prompt
        assert DELIMITERS.tuple_delimiter in prompt

    def test_prompt_uses_configured_delimiters(self, small_world):
        _, docs, _ = small_world
        chunk = chunk_documents(docs, l_max=30)[0]
        custom = DelimiterConfig(
            tuple_delimiter="<SEP>", record_delimiter="<REC>", completion_delimiter="<DONE>"
        )
        prompt = render_extraction_prompt(chunk, SCHEMA, custom, language="German")
        assert "<SEP>" in prompt and "<REC>" in prompt and "<DONE>" in prompt
        assert "<|>" not in prompt
        assert "{tuple_delimiter}" not in prompt
        assert "German" in prompt

    def test_examples_with_braces_render_verbatim(self, small_world):
        _, docs, _ = small_world
        chunk = chunk_documents(docs, l_max=30)[0]
        examples = 'Text: attrs {"color": "red"}\n("entity"{tuple_delimiter}Mug)'
        prompt = render_extraction_prompt(chunk, SCHEMA, DELIMITERS, "English", examples)
        assert 'attrs {"color": "red"}' in prompt
        assert '("entity"<|>Mug)' in prompt

    def test_stored_completions_are_reused(self, small_world, tmp_path):
        _, docs, _ = small_world
        chunks = chunk_documents(docs, l_max=30)[:5]
        engine = create_store_engine(str(tmp_path / "store.sqlite"))
        db = get_session_factory(engine)()
        repo = ChunkRepository(db)
        repo.replace_all(chunks)
        client = ScriptedMockClient(default_reply="<|COMPLETE|>")
        service = ExtractionService(client, SCHEMA, DELIMITERS, chunk_repo=repo)
        asyncio.run(service.extract_chunks(chunks))
        asyncio.run(service.extract_chunks(chunks))
        assert len(client.calls) == len(chunks)
        assert repo.completion_count() == len(chunks)
        db.close()
        engine.dispose()
