import logging
import os
import tempfile
from pathlib import Path

from app.schemas.graph import TemporalGraph
from app.services.graph.exporter import export_jsonl, import_graph

logger = logging.getLogger(__name__)


class GraphRepository:
    """The graph file: jsonl export format, replaced atomically on save."""

    def __init__(self, path: str):
        self.path = Path(path)

    def exists(self) -> bool:
        return self.path.exists()

    def load(self) -> TemporalGraph:
        graph = import_graph(self.path.read_bytes())
        logger.info(
            f"Loaded graph from {self.path}: {len(graph.nodes)} nodes, {len(graph.edges)} edges"
        )
        return graph

    def save(self, graph: TemporalGraph) -> str:
        payload = export_jsonl(graph)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{self.path.name}.", dir=self.path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(payload)
            os.replace(tmp_name, self.path)
        except Exception:
            Path(tmp_name).unlink(missing_ok=True)
            raise
        logger.info(f"Wrote graph to {self.path}")
        return payload
