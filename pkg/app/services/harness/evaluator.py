import logging
import time
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from asgi_correlation_id import correlation_id

from app.config import EngineConfig
from app.constants.llm_model import ClientRole
from app.models.enums import ElementKind, QuestionCategory
from app.schemas.documents import SourceDocument
from app.schemas.graph import TemporalGraph
from app.schemas.harness import (
    CategoryScore,
    EvaluationReport,
    GeneratedQuestion,
    GoldLog,
    QuestionOutcome,
    ScalingPoint,
    WorldSpec,
)
from app.schemas.qa import QARequest
from app.services.harness.questions import generate_questions
from app.services.harness.world import generate_world
from app.services.llm_clients import CompletionClient
from app.services.pipeline_service import (
    GraphPipeline,
    build_completion_client,
    build_keyword_client,
)
from app.services.qa.qa_service import answer
from app.services.retrieval.index import RetrievalIndex
from app.services.retrieval.retriever import ALL_COMPONENTS
from app.utils.exceptions import InsufficientEvidenceException
from app.utils.timeline import seconds_between

logger = logging.getLogger(__name__)

GAP_BUCKETS: List[Tuple[str, Optional[int]]] = [
    ("<1h", 3600),
    ("1-6h", 6 * 3600),
    ("6-24h", 24 * 3600),
    (">=24h", None),
]
LATENCY_PERCENTILES = (50, 90, 99)
# Captions are chunked one per segment so every fact keeps its own timestamp.
HARNESS_SEGMENTS_PER_CHUNK = 1


def harness_config(config: EngineConfig) -> EngineConfig:
    if config.chunking.max_segments_per_chunk is not None:
        return config
    config = config.model_copy(deep=True)
    config.chunking.max_segments_per_chunk = HARNESS_SEGMENTS_PER_CHUNK
    return config


def gap_bucket(seconds: int) -> str:
    for label, upper in GAP_BUCKETS:
        if upper is None or seconds < upper:
            return label
    return GAP_BUCKETS[-1][0]


def latency_summary(latencies: List[float]) -> Dict[str, float]:
    if not latencies:
        return {}
    values = np.asarray(latencies, dtype=np.float64)
    summary = {f"p{p}": float(np.percentile(values, p)) for p in LATENCY_PERCENTILES}
    summary["max"] = float(values.max())
    return summary


def evaluate(
    questions: Iterable[GeneratedQuestion],
    graph: TemporalGraph,
    index: RetrievalIndex,
    client: CompletionClient,
    k: int = 40,
    components: Iterable[ElementKind] = ALL_COMPONENTS,
    keyword_client: Optional[CompletionClient] = None,
    match_threshold: float = 0.5,
) -> EvaluationReport:
    """Multiple-choice exact match of ``answer`` against each question's gold option."""
    components = list(components)
    report = EvaluationReport(
        per_category={category.value: CategoryScore() for category in QuestionCategory},
        per_gap_bucket={label: CategoryScore() for label, _ in GAP_BUCKETS},
    )
    latencies = []
    for q in sorted(questions, key=lambda question: question.question_id):
        token = correlation_id.set(q.question_id)
        try:
            request = QARequest(question=q.text, t_q=q.t_q, choices=q.choices)
            start_time = time.perf_counter()
            result = answer(
                request,
                graph,
                index,
                client,
                k=k,
                components=components,
                keyword_client=keyword_client,
                match_threshold=match_threshold,
            )
            latency_ms = (time.perf_counter() - start_time) * 1000
        finally:
            correlation_id.reset(token)
        correct = result.choice == q.gold_letter
        gap = seconds_between(q.evidence_at, q.t_q)
        report.per_category[q.category.value].add(correct)
        report.per_gap_bucket[gap_bucket(gap)].add(correct)
        report.paths[result.path.value] = report.paths.get(result.path.value, 0) + 1
        report.unanswerable += int(result.choice is None)
        latencies.append(latency_ms)
        report.outcomes.append(
            QuestionOutcome(
                question_id=q.question_id,
                category=q.category,
                predicted=result.choice,
                gold=q.gold_letter,
                correct=correct,
                path=result.path,
                latency_ms=latency_ms,
                gap_seconds=gap,
            )
        )
        if not correct:
            logger.debug(f"{q.question_id}: predicted {result.choice}, gold {q.gold_letter}")
    report.question_count = len(report.outcomes)
    correct_count = sum(outcome.correct for outcome in report.outcomes)
    report.accuracy = correct_count / report.question_count if report.question_count else 0.0
    report.latency_ms = latency_summary(latencies)
    logger.info(f"Evaluated {report.question_count} questions: accuracy {report.accuracy:.3f}")
    return report


def evaluate_docs(
    docs: List[SourceDocument],
    questions: List[GeneratedQuestion],
    spec: WorldSpec,
    config: EngineConfig,
) -> Tuple[EvaluationReport, TemporalGraph]:
    config = harness_config(config)
    pipeline = GraphPipeline(config, world=spec)
    graph, _ = pipeline.build_in_memory(docs)
    index = pipeline.index(graph)
    client = build_completion_client(config.answering, ClientRole.ANSWERING, config, spec)
    report = evaluate(
        questions,
        graph,
        index,
        client,
        k=config.retrieval.k,
        components=config.retrieval.components,
        keyword_client=build_keyword_client(config),
        match_threshold=config.retrieval.match_threshold,
    )
    return report, graph


def evaluate_world(
    spec: WorldSpec, config: EngineConfig, n_per_category: int, seed: int = 0
) -> EvaluationReport:
    """Generate, build and answer in one pass over a synthetic world."""
    docs, gold = generate_world(spec)
    questions = generate_questions(gold, spec, n_per_category, seed)
    report, _ = evaluate_docs(docs, questions, spec, config)
    return report


def scaling_probe(
    spec: WorldSpec, config: EngineConfig, n_per_category: int, seed: int = 0
) -> List[ScalingPoint]:
    """Accuracy and latency over cumulative day prefixes of one world."""
    docs, gold = generate_world(spec)
    points = []
    for days in range(1, spec.days + 1):
        prefix_docs = [doc for doc in docs if doc.segments[0].timestamp.day <= days]
        prefix_gold = GoldLog(events=[e for e in gold.events if e.timestamp.day <= days])
        try:
            questions = generate_questions(prefix_gold, spec, n_per_category, seed)
        except InsufficientEvidenceException as e:
            logger.warning(f"Skipping {days}-day prefix: {e.message}")
            continue
        report, graph = evaluate_docs(prefix_docs, questions, spec, config)
        points.append(
            ScalingPoint(
                days=days,
                question_count=report.question_count,
                accuracy=report.accuracy,
                median_latency_ms=report.latency_ms.get("p50", 0.0),
                node_count=len(graph.nodes),
                edge_count=len(graph.edges),
            )
        )
    return points


def render_report_table(report: EvaluationReport) -> str:
    lines = [f"{'group':<24}{'total':>8}{'correct':>9}{'accuracy':>10}"]

    def row(label: str, score: CategoryScore):
        lines.append(f"{label:<24}{score.total:>8}{score.correct:>9}{score.accuracy:>10.3f}")

    for name, score in report.per_category.items():
        row(name, score)
    for name, score in report.per_gap_bucket.items():
        row(f"gap {name}", score)
    correct = sum(outcome.correct for outcome in report.outcomes)
    lines.append(
        f"{'overall':<24}{report.question_count:>8}{correct:>9}{report.accuracy:>10.3f}"
    )
    paths = ", ".join(f"{path}={count}" for path, count in sorted(report.paths.items()))
    lines.append(f"paths: {paths or 'none'}; unanswerable: {report.unanswerable}")
    if report.latency_ms:
        latency = ", ".join(f"{key}={value:.1f}ms" for key, value in report.latency_ms.items())
        lines.append(f"latency: {latency}")
    return "\n".join(lines) + "\n"


def render_scaling_table(points: List[ScalingPoint]) -> str:
    lines = [f"{'days':>4}{'questions':>11}{'accuracy':>10}{'p50 ms':>10}{'nodes':>8}{'edges':>8}"]
    for point in points:
        lines.append(
            f"{point.days:>4}{point.question_count:>11}{point.accuracy:>10.3f}"
            f"{point.median_latency_ms:>10.1f}{point.node_count:>8}{point.edge_count:>8}"
        )
    return "\n".join(lines) + "\n"
