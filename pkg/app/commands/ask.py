import argparse
import json
import logging
import sys
from typing import List

from pydantic import ValidationError

from app.commands.common import (
    add_graph_argument,
    add_retrieval_arguments,
    load_graph,
    read_lines,
)
from app.config import EngineConfig
from app.constants.llm_model import ClientRole
from app.models.enums import AnswerConfidence
from app.schemas.graph import TemporalGraph
from app.schemas.qa import Answer, QABatchItem, QARequest
from app.services.llm_clients import CompletionClient
from app.services.pipeline_service import (
    GraphPipeline,
    build_completion_client,
    build_keyword_client,
)
from app.services.qa.qa_service import answer
from app.services.retrieval.index import RetrievalIndex
from app.utils.exceptions import EXIT_UNANSWERABLE, MalformedInputException
from app.utils.timeline import parse_timestamp

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("ask", help="Answer a question against the graph at a time")
    parser.add_argument("question", nargs="?", help="Question text")
    parser.add_argument("--at", help='Query time, e.g. "[DAY3 14:00:00]"')
    parser.add_argument("--choices", nargs="+", help="Options for a multiple-choice question")
    parser.add_argument(
        "--batch", help='JSON-lines of {"question", "timestamp", "choices"?, "gold"?}'
    )
    add_graph_argument(parser)
    add_retrieval_arguments(parser)
    parser.set_defaults(handler=run, parser=parser)


class _Answerer:
    def __init__(self, config: EngineConfig, graph: TemporalGraph):
        pipeline = GraphPipeline(config)
        self.config = config
        self.graph = graph
        self.index: RetrievalIndex = pipeline.index(graph)
        self.client: CompletionClient = build_completion_client(
            config.answering, ClientRole.ANSWERING, config
        )
        self.keyword_client = build_keyword_client(config)

    def __call__(self, request: QARequest) -> Answer:
        retrieval = self.config.retrieval
        return answer(
            request,
            self.graph,
            self.index,
            self.client,
            k=retrieval.k,
            components=retrieval.components,
            keyword_client=self.keyword_client,
            match_threshold=retrieval.match_threshold,
        )


def read_batch(lines: List[str]) -> List[QABatchItem]:
    items = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            items.append(QABatchItem.model_validate_json(line))
        except ValidationError as e:
            raise MalformedInputException(line_no, str(e.errors()[0]["msg"]))
    return items


def _run_batch(path: str, answerer: _Answerer) -> int:
    for item in read_batch(read_lines([path])):
        request = QARequest(
            question=item.question, t_q=parse_timestamp(item.timestamp), choices=item.choices
        )
        result = answerer(request)
        row = {
            "question": item.question,
            "timestamp": item.timestamp,
            "answer": result.text,
            "choice": result.choice,
            "path": result.path.value,
            "confidence": result.confidence.value,
            "cited": [str(t) for t in result.cited_timestamps],
        }
        if item.gold is not None:
            row["correct"] = item.gold in (result.choice, result.text)
        print(json.dumps(row, ensure_ascii=False))
    return 0


def run(args: argparse.Namespace, config: EngineConfig) -> int:
    if args.batch is None and (not args.question or not args.at):
        args.parser.error("ask needs a question and --at, or --batch")
    if args.batch:
        return _run_batch(args.batch, _Answerer(config, load_graph(config)))

    t_q = parse_timestamp(args.at)
    try:
        request = QARequest(question=args.question, t_q=t_q, choices=args.choices)
    except ValidationError as e:
        args.parser.error(str(e.errors()[0]["msg"]))
    result = _Answerer(config, load_graph(config))(request)
    print(result.render())
    if result.confidence == AnswerConfidence.UNANSWERABLE:
        for note in result.diagnostics or ["no evidence at or before the query time"]:
            print(f"unanswerable: {note}", file=sys.stderr)
        return EXIT_UNANSWERABLE
    return 0
