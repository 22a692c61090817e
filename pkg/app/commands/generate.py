import argparse
import logging
from pathlib import Path

from app.config import EngineConfig
from app.services.extraction.chunker import write_segments_jsonl
from app.services.harness.questions import generate_questions, write_questions_jsonl
from app.services.harness.world import default_world_spec, generate_world, load_world_spec
from app.utils.exceptions import ConfigException

logger = logging.getLogger(__name__)

SEGMENTS_FILE = "segments.jsonl"
GOLD_FILE = "gold.jsonl"
QUESTIONS_FILE = "questions.jsonl"
WORLD_FILE = "world.json"


def register(subparsers):
    parser = subparsers.add_parser("gen", help="Generate a synthetic world, captions and questions")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--days", type=int, default=7)
    parser.add_argument("--questions", type=int, default=50, help="Questions per category")
    parser.add_argument("--output-dir", default=".", help="Directory for the generated files")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: EngineConfig) -> int:
    if args.days < 1:
        raise ConfigException("--days must be at least 1")
    if config.paths.world_spec:
        spec = load_world_spec(config.paths.world_spec).model_copy(
            update={"seed": args.seed, "days": args.days}
        )
    else:
        spec = default_world_spec(seed=args.seed, days=args.days)
    docs, gold = generate_world(spec)
    questions = generate_questions(gold, spec, args.questions, seed=args.seed)

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / WORLD_FILE).write_text(spec.model_dump_json(indent=2) + "\n", encoding="utf-8")
    (out / SEGMENTS_FILE).write_text(write_segments_jsonl(docs), encoding="utf-8")
    gold_lines = "".join(event.model_dump_json() + "\n" for event in gold.events)
    (out / GOLD_FILE).write_text(gold_lines, encoding="utf-8")
    (out / QUESTIONS_FILE).write_text(write_questions_jsonl(questions), encoding="utf-8")

    segment_count = sum(len(doc.segments) for doc in docs)
    print(f"{len(docs)} documents, {segment_count} segments, {len(gold.events)} events")
    print(f"{len(questions)} questions written to {out / QUESTIONS_FILE}")
    return 0
