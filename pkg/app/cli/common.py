"""
Flags shared by the run commands and the run configuration they build.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List

import pydantic

from app.config import settings
from app.core.errors import (
    EXIT_CANDIDATE_FAILURES,
    EXIT_INFRASTRUCTURE,
    EXIT_OK,
    ConfigurationError,
)
from app.models.evaluation import MatrixReport, RunConfig, Stage
from app.models.scenario import FunctionId
from app.services.sandbox import load_adapter


def add_run_flags(parser: argparse.ArgumentParser) -> None:
    """Flags mirroring RunConfig; they override values from --config."""
    parser.add_argument("--config", type=Path, help="RunConfig JSON file")
    parser.add_argument("--run-id", help="Run directory name")
    parser.add_argument(
        "--function",
        dest="functions",
        action="append",
        choices=[f.value for f in FunctionId],
        help="Function to evaluate (repeatable, default all)",
    )
    parser.add_argument("--repeats", type=int, help="Candidates per (model, function) cell")
    parser.add_argument("--parallelism", type=int, help="Candidates evaluated concurrently")
    parser.add_argument("--output-dir", help=f"Runs root (default {settings.RUNS_DIR})")
    parser.add_argument(
        "--keep-artifacts", action="store_true", default=None, help="Keep candidate workdirs"
    )
    parser.add_argument(
        "--provider",
        dest="providers",
        action="append",
        type=Path,
        help="ProviderConfig JSON file (repeatable)",
    )
    parser.add_argument(
        "--replay",
        type=Path,
        help="Replay root; every model directory under it becomes a replay provider",
    )
    parser.add_argument("--adapter", type=Path, help="CandidateAdapter JSON file")
    parser.add_argument("--template", help="Prompt template file")


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigurationError(f"cannot read {path}: {e}") from e
    except ValueError as e:
        raise ConfigurationError(f"{path} is not valid JSON: {e}") from e


def replay_providers(root: Path) -> List[Dict[str, Any]]:
    """One replay provider per model directory under a replay root."""
    if not root.is_dir():
        raise ConfigurationError(f"replay root {root} is not a directory")
    models = sorted(path.name for path in root.iterdir() if path.is_dir())
    if not models:
        raise ConfigurationError(f"replay root {root} has no model directories")
    return [{"kind": "replay_dir", "model": model, "replay_root": str(root)} for model in models]


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """
    Build the run configuration from --config and flag overrides.

    Raises:
        ConfigurationError: On unreadable files or invalid values
    """
    data: Dict[str, Any] = _read_json(args.config) if args.config else {}
    data.setdefault("output_dir", settings.RUNS_DIR)
    data.setdefault("keep_artifacts", settings.KEEP_ARTIFACTS)
    overrides = {
        "run_id": args.run_id,
        "functions": args.functions,
        "repeats": args.repeats,
        "parallelism": args.parallelism,
        "output_dir": args.output_dir,
        "keep_artifacts": args.keep_artifacts,
        "template_path": args.template,
    }
    data.update({key: value for key, value in overrides.items() if value is not None})

    providers = list(data.get("providers", []))
    providers.extend(_read_json(path) for path in args.providers or [])
    if args.replay:
        providers.extend(replay_providers(args.replay))
    data["providers"] = providers
    if args.adapter:
        data["adapter"] = load_adapter(args.adapter).model_dump()

    try:
        return RunConfig.model_validate(data)
    except pydantic.ValidationError as e:
        raise ConfigurationError(f"invalid run configuration: {e}") from e


def report_exit_code(report: MatrixReport) -> int:
    """2 when a cell was aborted by the harness, 1 when any candidate failed."""
    if any(cell.note and cell.note.startswith("infrastructure") for cell in report.cells):
        return EXIT_INFRASTRUCTURE
    if any(cell.bands.get(Stage.PASSED, 0) < cell.attempts for cell in report.cells):
        return EXIT_CANDIDATE_FAILURES
    return EXIT_OK


def emit(text: str) -> None:
    """Command output goes to stdout; logs go to stderr."""
    sys.stdout.write(text)
    sys.stdout.flush()
