import argparse

from app.commands.common import add_graph_argument
from app.config import EngineConfig
from app.services.graph.stats import graph_stats
from app.services.pipeline_service import GraphPipeline


def register(subparsers):
    parser = subparsers.add_parser("build", help="Extract and merge stored chunks into the graph")
    add_graph_argument(parser)
    parser.add_argument("--chunk-store", help="Chunk store file (defaults to paths.chunk_store)")
    parser.add_argument(
        "--fresh", action="store_true", help="Ignore an existing graph file instead of resuming"
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: EngineConfig) -> int:
    graph, summary = GraphPipeline(config).build(resume=not args.fresh)
    for key, value in summary.model_dump().items():
        print(f"{key}: {value}")
    print(graph_stats(graph).summary_line())
    return 0
