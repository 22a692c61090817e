import json
import re

import pytest

from app.main import main
from app.services.harness.mock_extractor import RuleBasedExtractionClient
from app.utils.exceptions import (
    EXIT_CLIENT,
    EXIT_UNANSWERABLE,
    EXIT_USAGE,
    ClientFailureException,
)


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def cli(*argv):
    return main(["--mock", "--log-level", "warning", *argv])


@pytest.fixture
def generated(workspace):
    assert cli("gen", "--seed", "2", "--days", "2", "--questions", "2", "--output-dir", "data") == 0
    return workspace / "data"


@pytest.fixture
def built(generated, workspace, capsys):
    assert cli("ingest", str(generated / "segments.jsonl"), "--chunk-store", "chunks.sqlite") == 0
    assert cli("build", "--chunk-store", "chunks.sqlite", "--graph", "graph.jsonl") == 0
    capsys.readouterr()
    return workspace / "graph.jsonl"


def test_gen_writes_all_files(generated, capsys):
    for name in ("world.json", "segments.jsonl", "gold.jsonl", "questions.jsonl"):
        assert (generated / name).exists()
    assert len((generated / "questions.jsonl").read_text().splitlines()) == 10


def test_ingest_reports_chunks(generated, capsys):
    assert cli("ingest", str(generated / "segments.jsonl")) == 0
    out = capsys.readouterr().out
    assert re.search(r"^\d+ chunks from 2 documents$", out, re.MULTILINE)
    assert "tokens:" in out


def test_ingest_empty_input(workspace, capsys):
    empty = workspace / "empty.jsonl"
    empty.write_text("")
    assert cli("ingest", str(empty)) == EXIT_USAGE
    assert "no segments" in capsys.readouterr().err


def test_ingest_malformed_line(workspace, capsys):
    bad = workspace / "bad.jsonl"
    bad.write_text('{"doc_id": "d", "timestamp": "[DAY1 08:00:00]", "text": "hi"}\nnot json\n')
    assert cli("ingest", str(bad)) == EXIT_USAGE
    assert "line 2" in capsys.readouterr().err


def test_missing_input_file(workspace, capsys):
    assert cli("ingest", "nowhere.jsonl") == EXIT_USAGE
    assert "error:" in capsys.readouterr().err


def test_build_is_byte_stable(built, workspace, capsys):
    first = built.read_bytes()
    assert cli("build", "--chunk-store", "chunks.sqlite", "--graph", "graph.jsonl") == 0
    assert "chunks_applied: 0" in capsys.readouterr().out
    assert built.read_bytes() == first
    fresh = ("build", "--chunk-store", "chunks.sqlite", "--graph", "graph.jsonl", "--fresh")
    assert cli(*fresh) == 0
    assert built.read_bytes() == first


def test_build_client_failure(generated, monkeypatch, capsys):
    def fail(self, prompt):
        raise ClientFailureException("extraction service unavailable")

    monkeypatch.setattr(RuleBasedExtractionClient, "complete", fail)
    assert cli("ingest", str(generated / "segments.jsonl")) == 0
    assert cli("build") == EXIT_CLIENT
    assert "extraction service unavailable" in capsys.readouterr().err


def test_ask_before_any_evidence(built, capsys):
    code = cli("ask", "Where did Alice last put the yellow mug?", "--at", "[DAY1 00:00:01]")
    assert code == EXIT_UNANSWERABLE
    captured = capsys.readouterr()
    assert "unanswerable" in captured.out
    assert "unanswerable:" in captured.err


def test_ask_day_zero_is_usage_error(built, capsys):
    assert cli("ask", "Where is Bob?", "--at", "[DAY0 10:00:00]") == EXIT_USAGE
    assert "error:" in capsys.readouterr().err


def test_ask_without_time_is_usage_error(built):
    with pytest.raises(SystemExit) as caught:
        cli("ask", "Where is Bob?")
    assert caught.value.code == EXIT_USAGE


def test_ask_with_one_choice_is_usage_error(built, capsys):
    with pytest.raises(SystemExit) as caught:
        cli("ask", "Where is Bob?", "--at", "[DAY1 10:00:00]", "--choices", "Kitchen")
    assert caught.value.code == EXIT_USAGE
    assert "choices must number between 2 and 26" in capsys.readouterr().err


def test_ask_missing_graph(workspace, capsys):
    assert cli("ask", "Where is Bob?", "--at", "[DAY1 10:00:00]") == EXIT_USAGE
    assert "Graph file not found" in capsys.readouterr().err


def test_ask_batch(built, generated, capsys):
    assert cli("ask", "--batch", str(generated / "questions.jsonl")) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert len(rows) == 10
    assert all("correct" in row for row in rows)


def test_negative_k(built, capsys):
    assert cli("ask", "Where is Bob?", "--at", "[DAY1 10:00:00]", "--k", "-1") == EXIT_USAGE


def test_stats_empty_graph(workspace, capsys):
    (workspace / "empty.jsonl").write_text("")
    assert cli("stats", "--graph", "empty.jsonl") == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == (
        "0 entities (0 persons, 0 events, 0 objects, 0 locations), 0 relationships"
    )


def test_stats_corrupt_graph(workspace, capsys):
    (workspace / "bad.jsonl").write_text('{"kind": "edge"\n')
    assert cli("stats", "--graph", "bad.jsonl") == EXIT_USAGE
    assert "line 1" in capsys.readouterr().err


def test_stats_window(built, capsys):
    assert cli("stats", "--graph", "graph.jsonl") == 0
    full = capsys.readouterr().out.splitlines()[0]
    window = ("[DAY1 00:00:00]", "[DAY1 00:00:01]")
    assert cli("stats", "--graph", "graph.jsonl", "--window", *window) == 0
    empty = capsys.readouterr().out.splitlines()[0]
    assert empty.endswith("0 relationships")
    assert full != empty


def test_stats_reversed_window(built):
    with pytest.raises(SystemExit) as caught:
        cli("stats", "--graph", "graph.jsonl", "--window", "[DAY2 00:00:00]", "[DAY1 00:00:00]")
    assert caught.value.code == EXIT_USAGE


EXPORT_MARKERS = [("jsonl", '"kind"'), ("dot", "graph"), ("cypher", "CREATE")]


@pytest.mark.parametrize("fmt,marker", EXPORT_MARKERS)
def test_export_formats(built, workspace, fmt, marker):
    target = workspace / f"out.{fmt}"
    assert cli("export", "--graph", "graph.jsonl", "--format", fmt, "--output", str(target)) == 0
    assert marker in target.read_text()


def test_export_jsonl_matches_graph_file(built, capsys):
    assert cli("export", "--graph", "graph.jsonl") == 0
    assert capsys.readouterr().out == built.read_text()


def test_eval_is_reproducible(workspace, capsys):
    args = ("eval", "--seed", "4", "--days", "2", "--questions", "2")
    assert cli(*args, "--report", "first.json") == 0
    first_table = capsys.readouterr().out
    assert cli(*args, "--report", "second.json") == 0
    assert capsys.readouterr().out == first_table
    assert (workspace / "first.json").read_bytes() == (workspace / "second.json").read_bytes()
    assert "overall" in first_table


def test_eval_questions_file(built, generated, capsys):
    questions = str(generated / "questions.jsonl")
    code = cli("eval", "--questions-file", questions, "--graph", "graph.jsonl")
    assert code == 0
    assert re.search(r"^overall\s+10\s", capsys.readouterr().out, re.MULTILINE)


def test_unknown_command():
    with pytest.raises(SystemExit) as caught:
        cli("serve")
    assert caught.value.code == EXIT_USAGE
