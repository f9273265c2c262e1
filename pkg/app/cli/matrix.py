"""
``matrix``: generate, evaluate and report every (model, function) cell.
"""
import argparse

from app.cli.common import add_run_flags, emit, load_run_config, report_exit_code
from app.services.orchestrator import run_matrix
from app.services.reporting import render_table


def add_parser(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    parser = subparsers.add_parser("matrix", help="Run the full model x function matrix")
    add_run_flags(parser)
    parser.set_defaults(handler=run)


async def run(args: argparse.Namespace) -> int:
    """Run the matrix, resuming the run directory if it exists."""
    report = await run_matrix(load_run_config(args))
    emit(render_table(report))
    return report_exit_code(report)
