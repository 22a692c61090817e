import argparse

from app.commands.common import add_graph_argument, load_graph, write_output
from app.config import EngineConfig
from app.models.enums import ExportFormat
from app.services.graph.exporter import export_graph


def register(subparsers):
    parser = subparsers.add_parser("export", help="Serialize the graph as jsonl, dot or cypher")
    parser.add_argument(
        "--format",
        dest="fmt",
        default=ExportFormat.JSONL.value,
        choices=[fmt.value for fmt in ExportFormat],
    )
    parser.add_argument("--output", help="Destination file (standard output when omitted)")
    add_graph_argument(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: EngineConfig) -> int:
    write_output(export_graph(load_graph(config), args.fmt), args.output)
    return 0
