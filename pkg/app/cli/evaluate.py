"""
``evaluate``: evaluate one candidate file, or a tree of stored responses.
"""
import argparse
import json
from pathlib import Path

import structlog

from app.cli.common import add_run_flags, emit, load_run_config, report_exit_code
from app.core.errors import EXIT_CANDIDATE_FAILURES, EXIT_OK, ConfigurationError
from app.models.candidate import CandidateCode, CandidateMeta
from app.models.evaluation import Stage
from app.models.scenario import FunctionId
from app.services.orchestrator import evaluate_candidate, run_matrix
from app.services.reporting import build_record, render_table
from app.services.sandbox import load_adapter
from app.services.traces import serialize_trace

logger = structlog.get_logger()


def add_parser(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    parser = subparsers.add_parser(
        "evaluate",
        help="Evaluate a candidate source file, or stored responses given with --replay",
    )
    parser.add_argument("--candidate", type=Path, help="Candidate source file")
    parser.add_argument(
        "--model", default="local", help="Model name recorded for --candidate (default local)"
    )
    parser.add_argument("--output", type=Path, help="Write the JSON record here, not to stdout")
    parser.add_argument("--traces-dir", type=Path, help="Write episode traces here")
    add_run_flags(parser)
    parser.set_defaults(handler=run)


async def _evaluate_file(args: argparse.Namespace) -> int:
    if not args.functions or len(args.functions) != 1:
        raise ConfigurationError("--candidate needs exactly one --function")
    try:
        source = args.candidate.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read candidate {args.candidate}: {e}") from e
    if not source.strip():
        raise ConfigurationError(f"candidate {args.candidate} is empty")

    function_id = FunctionId(args.functions[0])
    meta = CandidateMeta(model=args.model, function_id=function_id, attempt=1)
    adapter = load_adapter(args.adapter) if args.adapter else None
    outcome = await evaluate_candidate(
        CandidateCode(source=source, meta=meta), function_id, adapter
    )
    record = build_record(outcome)
    text = json.dumps(record, indent=2, sort_keys=True) + "\n"

    if args.traces_dir:
        args.traces_dir.mkdir(parents=True, exist_ok=True)
        for tc_id, trace in outcome.traces.items():
            path = args.traces_dir / f"{tc_id.value.lower()}.jsonl"
            path.write_text(serialize_trace(trace), encoding="utf-8")
    if args.output:
        args.output.write_text(text, encoding="utf-8")
    else:
        emit(text)
    return EXIT_OK if outcome.stage == Stage.PASSED else EXIT_CANDIDATE_FAILURES


async def run(args: argparse.Namespace) -> int:
    """
    Evaluate candidates.

    With --candidate, prints the per-candidate JSON record. Otherwise runs the
    configured providers (typically --replay over a ``generate`` output) into a
    run directory and prints the report table.

    Args:
        args: Parsed command-line arguments

    Returns:
        int: Exit code
    """
    if args.candidate:
        return await _evaluate_file(args)
    config = load_run_config(args)
    report = await run_matrix(config)
    emit(render_table(report))
    return report_exit_code(report)
