"""
``generate``: collect raw responses without evaluating them.
"""
import argparse

import structlog

from app.cli.common import add_run_flags, emit, load_run_config
from app.core.errors import EXIT_OK
from app.services.orchestrator import generate_responses

logger = structlog.get_logger()


def add_parser(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    parser = subparsers.add_parser(
        "generate", help="Request completions and store them replay-compatible"
    )
    add_run_flags(parser)
    parser.set_defaults(handler=run)


async def run(args: argparse.Namespace) -> int:
    """
    Store raw responses under <output>/<run-id>/responses.

    Args:
        args: Parsed command-line arguments

    Returns:
        int: Exit code
    """
    config = load_run_config(args)
    root = await generate_responses(config)
    logger.info("generate_complete", responses=str(root))
    emit(f"{root}\n")
    return EXIT_OK
