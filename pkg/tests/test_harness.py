import random
from pathlib import Path

import pytest

from app.models.enums import QuestionCategory
from app.schemas.harness import GoldLog
from app.services.harness import oracle
from app.services.harness.evaluator import (
    evaluate_docs,
    evaluate_world,
    gap_bucket,
    harness_config,
    latency_summary,
    render_report_table,
    scaling_probe,
)
from app.services.harness.grammar import SentenceGrammar
from app.services.harness.questions import (
    CHOICE_COUNT,
    generate_questions,
    read_questions_jsonl,
    write_questions_jsonl,
)
from app.services.harness.world import (
    default_world_spec,
    generate_world,
    load_world_spec,
    recount_events,
    world_state,
)
from app.services.pipeline_service import GraphPipeline
from app.utils.exceptions import (
    ConfigException,
    InsufficientEvidenceException,
    MalformedInputException,
)
from app.utils.timeline import format_timestamp

TIMINGS = {"latency_ms": True, "outcomes": {"__all__": {"latency_ms"}}}


class TestWorld:
    def test_generation_is_seeded(self, small_world):
        spec, docs, gold = small_world
        again_docs, again_gold = generate_world(spec)
        assert again_docs == docs
        assert again_gold == gold
        _, other_gold = generate_world(default_world_spec(seed=4, days=2))
        assert other_gold != gold

    def test_recount_from_captions_matches_gold(self, small_world):
        spec, docs, gold = small_world
        assert recount_events(docs, spec) == gold

    def test_every_caption_parses(self, small_world):
        spec, docs, _ = small_world
        grammar = SentenceGrammar(spec)
        for doc in docs:
            for segment in doc.segments:
                assert grammar.parse(segment.text) is not None, segment.text

    def test_events_stay_in_daytime(self, small_world):
        spec, _, gold = small_world
        for event in gold.events:
            assert spec.day_start_hour * 3600 <= event.timestamp.seconds_of_day
            assert event.timestamp.seconds_of_day < spec.day_end_hour * 3600 + spec.slot_seconds

    def test_world_state_tracks_latest_placement(self, small_world):
        _, _, gold = small_world
        end = gold.events[-1].timestamp
        state = world_state(gold, end)
        for event in gold.events:
            if event.kind == "placement":
                found = oracle.last_location(gold, event.object, end)
                assert state[f"{event.object}.location"] == found[0]

    def test_load_world_spec(self, tmp_path):
        path = tmp_path / "world.json"
        spec = default_world_spec(seed=9, days=3)
        path.write_text(spec.model_dump_json())
        assert load_world_spec(str(path)) == spec
        assert load_world_spec(None, seed=2).seed == 2

    def test_invalid_world_spec(self, tmp_path):
        path = tmp_path / "world.json"
        path.write_text('{"persons": []}')
        with pytest.raises(ConfigException):
            load_world_spec(str(path))
        with pytest.raises(ConfigException):
            load_world_spec(str(tmp_path / "missing.json"))


class TestOracle:
    def test_last_occurrence_at_its_own_time(self, small_world):
        _, _, gold = small_world
        rng = random.Random(0)
        activities = [e for e in gold.events if e.kind == "activity"]
        for _ in range(200):
            event = rng.choice(activities)
            t_q = event.timestamp
            found = oracle.occurrence(gold, event.subject, event.activity, t_q, first=False)
            assert found == (format_timestamp(t_q), t_q)

    def test_missing_evidence(self, small_world):
        _, _, gold = small_world
        first = gold.events[0].timestamp
        empty = GoldLog()
        assert oracle.last_location(empty, "yellow mug", first) is None
        assert oracle.activity_after(empty, "Alice", "make coffee", first) is None


class TestQuestions:
    def test_balanced_and_grounded(self, small_world):
        spec, _, gold = small_world
        questions = generate_questions(gold, spec, 5, seed=1)
        assert len(questions) == 5 * len(QuestionCategory)
        for category in QuestionCategory:
            assert sum(q.category == category for q in questions) == 5
        assert len({q.question_id for q in questions}) == len(questions)
        for q in questions:
            assert q.evidence_at <= q.t_q
            assert q.gold == oracle.oracle_answer(gold, q)
            assert q.choices[ord(q.gold_letter) - ord("A")] == q.gold
            assert len(set(q.choices)) == len(q.choices) <= CHOICE_COUNT

    def test_seeded(self, small_world):
        spec, _, gold = small_world
        assert generate_questions(gold, spec, 3, seed=8) == generate_questions(gold, spec, 3, 8)

    def test_zero_and_negative(self, small_world):
        spec, _, gold = small_world
        assert generate_questions(gold, spec, 0) == []
        with pytest.raises(ValueError):
            generate_questions(gold, spec, -1)

    def test_empty_log_cannot_ground_questions(self, small_world):
        spec, _, _ = small_world
        with pytest.raises(InsufficientEvidenceException):
            generate_questions(GoldLog(), spec, 1)

    def test_jsonl_round_trip(self, small_world):
        spec, _, gold = small_world
        questions = generate_questions(gold, spec, 2, seed=5)
        text = write_questions_jsonl(questions)
        assert read_questions_jsonl(text.splitlines()) == questions

    def test_malformed_line(self, small_world):
        spec, _, gold = small_world
        lines = write_questions_jsonl(generate_questions(gold, spec, 1)).splitlines()
        lines.insert(1, '{"question": "Where?"}')
        with pytest.raises(MalformedInputException) as caught:
            read_questions_jsonl(lines)
        assert caught.value.line_no == 2


class TestReporting:
    @pytest.mark.parametrize(
        "seconds,label",
        [(0, "<1h"), (3599, "<1h"), (3600, "1-6h"), (6 * 3600, "6-24h"), (86400, ">=24h")],
    )
    def test_gap_bucket(self, seconds, label):
        assert gap_bucket(seconds) == label

    def test_latency_summary(self):
        assert latency_summary([]) == {}
        summary = latency_summary([1.0, 2.0, 3.0])
        assert summary["p50"] == 2.0
        assert summary["max"] == 3.0

    def test_harness_config_chunks_one_segment(self, config):
        assert harness_config(config).chunking.max_segments_per_chunk == 1
        assert config.chunking.max_segments_per_chunk is None


class TestEvaluation:
    def test_small_world_report(self, small_world, config):
        spec, docs, gold = small_world
        questions = generate_questions(gold, spec, 4, seed=2)
        report, graph = evaluate_docs(docs, questions, spec, config)
        assert report.question_count == 20
        assert all(score.total == 4 for score in report.per_category.values())
        assert sum(report.paths.values()) == 20
        assert report.per_category[QuestionCategory.ENTITY_TRACKING.value].accuracy == 1.0
        assert graph.nodes
        table = render_report_table(report)
        assert "overall" in table and "EntityTracking" in table

    def test_order_does_not_matter(self, small_world, config):
        spec, docs, gold = small_world
        questions = generate_questions(gold, spec, 3, seed=6)
        shuffled = list(questions)
        random.Random(1).shuffle(shuffled)
        first, _ = evaluate_docs(docs, questions, spec, config)
        second, _ = evaluate_docs(docs, shuffled, spec, config)
        assert first.model_dump(exclude=TIMINGS) == second.model_dump(exclude=TIMINGS)

    def test_reproducible(self, config):
        spec = default_world_spec(seed=11, days=2)
        first = evaluate_world(spec, config, 2, seed=3)
        second = evaluate_world(spec, config, 2, seed=3)
        assert first.model_dump(exclude=TIMINGS) == second.model_dump(exclude=TIMINGS)

    @pytest.mark.slow
    def test_default_world_accuracy(self, config):
        report = evaluate_world(default_world_spec(seed=0), config, 50, seed=0)
        assert report.question_count == 50 * len(QuestionCategory)
        assert report.accuracy >= 0.95

    @pytest.mark.slow
    def test_scaling_probe(self, config):
        points = scaling_probe(default_world_spec(seed=0), config, 10, seed=0)
        assert [point.days for point in points] == list(range(1, 8))
        node_counts = [point.node_count for point in points]
        assert node_counts == sorted(node_counts)
        accuracies = [point.accuracy for point in points]
        assert max(accuracies) - min(accuracies) <= 0.05


class TestPipeline:
    def test_build_resume_and_rebuild_are_identical(self, small_world, config):
        spec, docs, _ = small_world
        config = harness_config(config)
        pipeline = GraphPipeline(config, world=spec)
        chunks = pipeline.ingest(docs)
        graph, summary = pipeline.build()
        assert summary.chunks_applied == len(chunks)
        first = Path(config.paths.graph_file).read_bytes()

        resumed, again = GraphPipeline(config, world=spec).build()
        assert again.chunks_applied == 0
        assert again.chunks_skipped == len(chunks)
        assert Path(config.paths.graph_file).read_bytes() == first

        GraphPipeline(config, world=spec).build(resume=False)
        assert Path(config.paths.graph_file).read_bytes() == first
        assert resumed.nodes.keys() == graph.nodes.keys()

    def test_stored_completions_are_reused(self, small_world, config):
        spec, docs, _ = small_world
        pipeline = GraphPipeline(harness_config(config), world=spec)
        pipeline.ingest(docs[:1])
        pipeline.build()
        calls = pipeline.extraction_client.calls
        assert calls > 0
        pipeline.build(resume=False)
        assert pipeline.extraction_client.calls == calls
