"""
Append-only run journal and per-candidate artifact bundles.

Layout of a run directory::

    <runs>/<run-id>/run.json                         run config, hashes, start time
    <runs>/<run-id>/journal.jsonl                    one line per outcome or closed cell
    <runs>/<run-id>/<model>/<function>/attempt_###/  candidate.py, response.txt,
                                                     traces/<tc>.jsonl, record.json
"""
import asyncio
import json
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Tuple

import structlog

from app.core.errors import ConfigurationError, InfrastructureError
from app.models.evaluation import EvaluationOutcome, RunConfig
from app.models.scenario import FunctionId
from app.services.traces import serialize_trace

logger = structlog.get_logger()

JOURNAL_NAME = "journal.jsonl"
RUN_FILE = "run.json"

_UNSAFE_RE = re.compile(r"[^A-Za-z0-9_.-]")

Cell = Tuple[str, FunctionId]


def safe_name(model: str) -> str:
    """Directory name for a model (``llama3:8b`` -> ``llama3_8b``)."""
    return _UNSAFE_RE.sub("_", model)


def attempt_dir(run_dir: Path, model: str, function_id: FunctionId, attempt: int) -> Path:
    return run_dir / safe_name(model) / function_id.value / f"attempt_{attempt:03d}"


class RunJournal:
    """
    Journal of one run directory.

    Writes go through a single asyncio lock so concurrent evaluations append
    whole lines.
    """

    def __init__(self, run_dir: Path) -> None:
        self.run_dir = run_dir
        self.path = run_dir / JOURNAL_NAME
        self._lock = asyncio.Lock()
        self.outcomes: Dict[Cell, Dict[int, Dict[str, Any]]] = {}
        self.cells: Dict[Cell, Dict[str, Any]] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.is_file():
            return
        for number, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                cell = (entry["model"], FunctionId(entry["function"]))
            except (ValueError, KeyError) as e:
                # a torn last line from an interrupted run is dropped
                logger.warning("journal_line_skipped", line=number, error=str(e))
                continue
            if entry.get("kind") == "outcome":
                self.outcomes.setdefault(cell, {})[entry["attempt"]] = entry["outcome"]
            elif entry.get("kind") == "cell":
                self.cells[cell] = entry
        logger.info(
            "journal_loaded",
            run_dir=str(self.run_dir),
            outcomes=sum(len(items) for items in self.outcomes.values()),
            cells=len(self.cells),
        )

    def cell_complete(self, model: str, function_id: FunctionId) -> bool:
        entry = self.cells.get((model, function_id))
        return bool(entry and entry.get("complete"))

    def evaluated_attempts(self, model: str, function_id: FunctionId) -> Set[int]:
        return set(self.outcomes.get((model, function_id), {}))

    async def _append(self, entry: Dict[str, Any]) -> None:
        line = json.dumps(entry, separators=(",", ":"), sort_keys=True) + "\n"
        async with self._lock:
            try:
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(line)
                    handle.flush()
            except OSError as e:
                raise InfrastructureError(f"cannot append to {self.path}: {e}") from e

    async def record_outcome(self, outcome: EvaluationOutcome) -> None:
        """Journal one evaluated candidate."""
        meta = outcome.meta
        dumped = outcome.model_dump(mode="json")
        await self._append(
            {
                "kind": "outcome",
                "model": meta.model,
                "function": meta.function_id.value,
                "attempt": meta.attempt,
                "outcome": dumped,
            }
        )
        self.outcomes.setdefault((meta.model, meta.function_id), {})[meta.attempt] = dumped

    async def close_cell(
        self,
        model: str,
        function_id: FunctionId,
        repeats: int,
        failed_attempts: Optional[List[int]] = None,
        note: Optional[str] = None,
    ) -> None:
        """
        Mark a cell finished.

        A cell with failed provider attempts or an infrastructure note stays
        incomplete and is retried on the next run.
        """
        failed = sorted(failed_attempts or [])
        entry = {
            "kind": "cell",
            "model": model,
            "function": function_id.value,
            "repeats": repeats,
            "complete": not failed and note is None,
            "failed_attempts": failed,
            "note": note,
        }
        await self._append(entry)
        self.cells[(model, function_id)] = entry
        logger.info(
            "cell_closed",
            model=model,
            function=function_id.value,
            complete=entry["complete"],
            failed_attempts=len(failed),
        )

    def outcomes_for(self, model: str, function_id: FunctionId) -> List[EvaluationOutcome]:
        """Journaled outcomes of a cell, by attempt index."""
        items = self.outcomes.get((model, function_id), {})
        return [EvaluationOutcome.model_validate(items[attempt]) for attempt in sorted(items)]


def write_run_file(
    run_dir: Path, config: RunConfig, config_hash: str, pipeline_hash: str
) -> Dict[str, Any]:
    """
    Create the run directory and its run.json, keeping the original start time on reruns.

    Raises:
        ConfigurationError: If the output directory is not writable
    """
    path = run_dir / RUN_FILE
    started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if path.is_file():
        started_at = json.loads(path.read_text(encoding="utf-8")).get("started_at", started_at)
    payload = {
        "run_id": config.run_id,
        "started_at": started_at,
        "config_hash": config_hash,
        "pipeline_hash": pipeline_hash,
        "config": config.model_dump(mode="json"),
    }
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"output directory {run_dir} is not writable: {e}") from e
    return payload


def read_run_file(run_dir: Path) -> Dict[str, Any]:
    """
    Load run.json of an existing run directory.

    Raises:
        ConfigurationError: If the directory holds no run
    """
    path = run_dir / RUN_FILE
    if not path.is_file():
        raise ConfigurationError(f"{run_dir} is not a run directory (no {RUN_FILE})")
    try:
        payload: Dict[str, Any] = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise ConfigurationError(f"corrupt {path}: {e}") from e
    return payload


def write_bundle(
    run_dir: Path,
    outcome: EvaluationOutcome,
    record: Dict[str, Any],
    source: Optional[str],
    response: Optional[str],
) -> Path:
    """
    Write the review bundle of one candidate.

    Raises:
        InfrastructureError: If the bundle cannot be written
    """
    meta = outcome.meta
    directory = attempt_dir(run_dir, meta.model, meta.function_id, meta.attempt)
    try:
        (directory / "traces").mkdir(parents=True, exist_ok=True)
        if source is not None:
            (directory / "candidate.py").write_text(source, encoding="utf-8")
        if response is not None:
            (directory / "response.txt").write_text(response, encoding="utf-8")
        for tc_id, trace in sorted(outcome.traces.items(), key=lambda item: item[0].value):
            (directory / "traces" / f"{tc_id.value.lower()}.jsonl").write_text(
                serialize_trace(trace), encoding="utf-8"
            )
        (directory / "record.json").write_text(
            json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as e:
        raise InfrastructureError(f"cannot write bundle {directory}: {e}") from e
    return directory
