import argparse
from pathlib import Path
from typing import Iterable, List, Optional

from app.config import EngineConfig
from app.models.enums import ElementKind
from app.repository.graph_repository import GraphRepository
from app.schemas.graph import TemporalGraph
from app.utils.exceptions import ConfigException


def add_graph_argument(parser: argparse.ArgumentParser):
    parser.add_argument("--graph", help="Graph file (defaults to paths.graph_file)")


def add_retrieval_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--k", type=int, help="Elements retrieved per component")
    parser.add_argument(
        "--components",
        nargs="+",
        choices=[kind.value for kind in ElementKind],
        help="Retrieval components to search",
    )


def apply_overrides(config: EngineConfig, args: argparse.Namespace) -> EngineConfig:
    if getattr(args, "graph", None):
        config.paths.graph_file = args.graph
    if getattr(args, "chunk_store", None):
        config.paths.chunk_store = args.chunk_store
    if getattr(args, "k", None) is not None:
        if args.k < 0:
            raise ConfigException("--k must not be negative")
        config.retrieval.k = args.k
    if getattr(args, "components", None):
        config.retrieval.components = [ElementKind(value) for value in args.components]
    return config


def load_graph(config: EngineConfig) -> TemporalGraph:
    repo = GraphRepository(config.paths.graph_file)
    if not repo.exists():
        raise ConfigException(f"Graph file not found: {config.paths.graph_file}")
    return repo.load()


def read_lines(paths: Iterable[str]) -> List[str]:
    lines: List[str] = []
    for path in paths:
        try:
            lines.extend(Path(path).read_text(encoding="utf-8").splitlines())
        except OSError as e:
            raise ConfigException(f"Cannot read {path}: {e}")
    return lines


def write_output(text: str, path: Optional[str]):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
