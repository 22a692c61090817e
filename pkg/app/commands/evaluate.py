import argparse
import logging
from pathlib import Path

from app.commands.common import add_retrieval_arguments, load_graph, read_lines
from app.config import EngineConfig
from app.constants.llm_model import ClientRole
from app.schemas.harness import EvaluationReport
from app.services.harness.evaluator import (
    evaluate,
    evaluate_world,
    render_report_table,
    render_scaling_table,
    scaling_probe,
)
from app.services.harness.questions import read_questions_jsonl
from app.services.harness.world import default_world_spec, load_world_spec
from app.services.pipeline_service import (
    GraphPipeline,
    build_completion_client,
    build_keyword_client,
)
from app.utils.exceptions import ConfigException

logger = logging.getLogger(__name__)

# wall-clock fields differ between runs
TIMING_FIELDS = {"latency_ms": True, "outcomes": {"__all__": {"latency_ms"}}}


def register(subparsers):
    parser = subparsers.add_parser(
        "eval", help="Score answers against gold multiple-choice options"
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--days", type=int, default=7)
    parser.add_argument("--questions", type=int, default=50, help="Questions per category")
    parser.add_argument(
        "--questions-file",
        help="Evaluate these generated questions against --graph instead of a fresh world",
    )
    parser.add_argument("--graph", help="Graph file for --questions-file")
    parser.add_argument("--scaling", action="store_true", help="Evaluate cumulative day prefixes")
    parser.add_argument("--report", help="Write the JSON report to this file")
    parser.add_argument("--timings", action="store_true", help="Include latency figures")
    add_retrieval_arguments(parser)
    parser.set_defaults(handler=run)


def _evaluate_file(args: argparse.Namespace, config: EngineConfig) -> EvaluationReport:
    questions = read_questions_jsonl(read_lines([args.questions_file]))
    graph = load_graph(config)
    retrieval = config.retrieval
    return evaluate(
        questions,
        graph,
        GraphPipeline(config).index(graph),
        build_completion_client(config.answering, ClientRole.ANSWERING, config),
        k=retrieval.k,
        components=retrieval.components,
        keyword_client=build_keyword_client(config),
        match_threshold=retrieval.match_threshold,
    )


def run(args: argparse.Namespace, config: EngineConfig) -> int:
    if args.days < 1:
        raise ConfigException("--days must be at least 1")
    if config.paths.world_spec:
        spec = load_world_spec(config.paths.world_spec).model_copy(
            update={"seed": args.seed, "days": args.days}
        )
    else:
        spec = default_world_spec(seed=args.seed, days=args.days)

    if args.scaling:
        points = scaling_probe(spec, config, args.questions, seed=args.seed)
        if not args.timings:
            points = [point.model_copy(update={"median_latency_ms": 0.0}) for point in points]
        print(render_scaling_table(points), end="")
        if args.report:
            body = "[\n" + ",\n".join(point.model_dump_json() for point in points) + "\n]\n"
            Path(args.report).write_text(body, encoding="utf-8")
        return 0

    if args.questions_file:
        report = _evaluate_file(args, config)
    else:
        report = evaluate_world(spec, config, args.questions, seed=args.seed)
    if not args.timings:
        report = EvaluationReport.model_validate(report.model_dump(exclude=TIMING_FIELDS))
    print(render_report_table(report), end="")
    if args.report:
        Path(args.report).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return 0
