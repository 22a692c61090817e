import argparse
import logging
import sys
import uuid
from typing import List, Optional

from asgi_correlation_id import correlation_id

from app.commands import register_commands
from app.commands.common import apply_overrides
from app.config import LOG_LEVEL, load_engine_config
from app.logging_config import configure_logging
from app.utils.exceptions import EngineException

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egograph",
        description="Temporal knowledge graph over timestamped egocentric captions",
    )
    parser.add_argument("--config", help="JSON config document (defaults when omitted)")
    parser.add_argument(
        "--mock", action="store_true", help="Use the deterministic mock for every client"
    )
    parser.add_argument("--log-level", default=LOG_LEVEL, help="Logging level for stderr")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_commands(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level.upper())
    token = correlation_id.set(uuid.uuid4().hex[:8])
    try:
        config = apply_overrides(load_engine_config(args.config, force_mock=args.mock), args)
        return args.handler(args, config)
    except EngineException as e:
        logger.debug(f"{args.command} failed with {e.detail['type']}", exc_info=True)
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code
    finally:
        correlation_id.reset(token)


if __name__ == "__main__":
    sys.exit(main())
