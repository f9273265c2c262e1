"""
``report``: rebuild report.json and report.txt from a run directory.
"""
import argparse
from pathlib import Path

from app.cli.common import emit, report_exit_code
from app.services.reporting import render_table, write_report


def add_parser(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    parser = subparsers.add_parser("report", help="Summarize a run directory")
    parser.add_argument("run_dir", type=Path, help="Run directory (<runs>/<run-id>)")
    parser.set_defaults(handler=run)


async def run(args: argparse.Namespace) -> int:
    report = write_report(args.run_dir)
    emit(render_table(report))
    return report_exit_code(report)
