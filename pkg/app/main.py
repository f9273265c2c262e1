"""
silgate - simulation-in-the-loop gate for generated controller code.
Command-line entry point dispatching to the subcommands in app.cli.
"""
import argparse
import asyncio
import sys
from typing import List, Optional

import structlog

from app import __version__
from app.cli import evaluate, generate, matrix, replay_trace, report
from app.config import settings
from app.core.errors import handle_cli_error
from app.core.logging_config import configure_logging

logger = structlog.get_logger()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="silgate",
        description="Evaluate machine-generated vehicle controllers in closed-loop simulation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in (generate, evaluate, matrix, report, replay_trace):
        command.add_parser(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run one command.

    Returns:
        int: 0 success, 1 candidate-level failures present, 2 infrastructure error
    """
    args = build_parser().parse_args(argv)
    configure_logging()
    logger.debug("command_started", command=args.command, environment=settings.ENVIRONMENT)
    try:
        code: int = asyncio.run(args.handler(args))
    except KeyboardInterrupt:
        logger.warning("command_interrupted", command=args.command)
        return 130
    except Exception as e:
        return handle_cli_error(e)
    return code


if __name__ == "__main__":
    sys.exit(main())
