"""
``replay-trace``: render a stored trace as a timeline or CSV.
"""
import argparse
from pathlib import Path

from app.cli.common import emit
from app.core.errors import EXIT_OK, ConfigurationError
from app.services.traces import parse_trace, render_csv, render_timeline


def add_parser(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    parser = subparsers.add_parser("replay-trace", help="Export a trace for review")
    parser.add_argument("trace", type=Path, help="Trace file (.jsonl)")
    parser.add_argument(
        "--format", choices=["timeline", "csv"], default="timeline", help="Output format"
    )
    parser.set_defaults(handler=run)


async def run(args: argparse.Namespace) -> int:
    """
    Print a trace.

    Raises:
        TraceParseError: If the trace is corrupt
    """
    try:
        text = args.trace.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read trace {args.trace}: {e}") from e
    trace = parse_trace(text)
    emit(render_csv(trace) if args.format == "csv" else render_timeline(trace))
    return EXIT_OK
