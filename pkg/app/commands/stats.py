import argparse

from pydantic import ValidationError

from app.commands.common import add_graph_argument, load_graph
from app.config import EngineConfig
from app.schemas.timeline import TimeWindow
from app.services.graph.stats import graph_stats
from app.services.graph.views import window_query
from app.utils.timeline import parse_timestamp


def register(subparsers):
    parser = subparsers.add_parser("stats", help="Count entities and relationships")
    parser.add_argument(
        "--window",
        nargs=2,
        metavar=("START", "END"),
        help="Restrict the counts to edges with a timestamp inside [START, END]",
    )
    add_graph_argument(parser)
    parser.set_defaults(handler=run, parser=parser)


def run(args: argparse.Namespace, config: EngineConfig) -> int:
    graph = load_graph(config)
    if args.window:
        start, end = (parse_timestamp(text) for text in args.window)
        try:
            window = TimeWindow(start=start, end=end)
        except ValidationError:
            args.parser.error(f"--window end {end} precedes start {start}")
        graph = window_query(graph, window)
    stats = graph_stats(graph)
    print(stats.summary_line())
    print(f"chunks: {stats.chunk_count}; stubs: {stats.stub_count}")
    print(f"timestamps: {stats.node_timestamps} on nodes, {stats.edge_timestamps} on edges")
    print(f"descriptions: {stats.descriptions}")
    return 0
