"""
Per-candidate JSON records and matrix reports.

Reports are a pure function of the run directory. The only timestamp
(``generated_at``, the run start) lives in the report header; the body is
byte-stable across reruns.
"""
import dataclasses
import hashlib
import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import structlog
from jsonschema import Draft202012Validator

from app import __version__
from app.config import settings
from app.core.errors import ConfigurationError, InfrastructureError, SchemaViolationError
from app.core.functions import cases_for
from app.core.thresholds import GOAL_THRESHOLDS
from app.models.evaluation import (
    CellCounts,
    CellSummary,
    CheckResult,
    EvaluationOutcome,
    FailureEvidence,
    FailureMode,
    MatrixReport,
    Requirement,
    RunConfig,
    Stage,
)
from app.models.scenario import FunctionId, TestCaseId
from app.services.journal import RunJournal, read_run_file
from app.services.metrics import PASS_AT_K, compute_pass_at_k, rank_candidates
from app.services.scenario_engine import instantiate_tc, serialize_scenario
from app.services.simulation import DT

logger = structlog.get_logger()

SCHEMA_PATH = (
    Path(__file__).resolve().parent.parent / "resources" / "outcome_record.schema.json"
)
SCHEMA_VERSION = 1
REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"
BAND_ORDER = (Stage.PASSED, Stage.EXECUTED_FAILED, Stage.NON_EXECUTABLE, Stage.NON_COMPILABLE)


def _sha256(payload: Any) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# Records


@lru_cache(maxsize=1)
def _validator() -> Draft202012Validator:
    try:
        schema = json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise ConfigurationError(f"cannot load record schema {SCHEMA_PATH}: {e}") from e
    Draft202012Validator.check_schema(schema)
    return Draft202012Validator(schema)


def validate_record(record: Dict[str, Any]) -> None:
    """
    Check a record against the shipped schema.

    Raises:
        SchemaViolationError: On the first violation, with its JSON path
    """
    errors = sorted(_validator().iter_errors(record), key=lambda error: list(error.path))
    if errors:
        first = errors[0]
        path = "/".join(str(part) for part in first.path) or "<root>"
        raise SchemaViolationError(f"record violates schema at {path}: {first.message}")


def _check(result: CheckResult) -> Dict[str, Any]:
    return {"status": result.status.value, "tick": result.tick, "detail": result.detail}


def _evidence(item: FailureEvidence) -> Dict[str, Any]:
    return {
        "mode": item.mode.value,
        "detail": item.detail,
        "tc_id": item.tc_id.value if item.tc_id else None,
        "tick": item.tick,
        "location": item.location,
    }


def build_record(outcome: EvaluationOutcome) -> Dict[str, Any]:
    """
    Per-candidate JSON record, validated before it is returned.

    Raises:
        SchemaViolationError: If the record does not match the schema
    """
    per_tc = []
    for episode in outcome.episodes:
        verdict = episode.verdict
        entry: Dict[str, Any] = {
            "tc_id": episode.tc_id.value,
            **{
                requirement.value: _check(verdict.requirements[requirement])
                for requirement in Requirement
            },
            "goal": _check(verdict.goal),
            "overall": verdict.overall,
            "terminal": episode.terminal.model_dump(mode="json"),
            "ticks": episode.ticks,
            "trace_hash": episode.trace_hash,
            "evidence": [
                _evidence(item) for item in outcome.failure_modes if item.tc_id == episode.tc_id
            ],
        }
        per_tc.append(entry)

    record = {
        "schema_version": SCHEMA_VERSION,
        "meta": outcome.meta.model_dump(mode="json"),
        "stage": outcome.stage.value,
        "compile": (
            {"stage": outcome.compile.stage.value, "diagnostics": outcome.compile.diagnostics}
            if outcome.compile
            else None
        ),
        "per_tc": per_tc,
        "failure_modes": [_evidence(item) for item in outcome.failure_modes],
        "timings": {"wall_time_s": round(outcome.wall_time_s, 3)},
        "source_length": outcome.source_length,
        "extraction_failure": outcome.extraction_failure,
        "evaluation_error": outcome.evaluation_error,
    }
    validate_record(record)
    return record


# Hashes


def config_hash(config: RunConfig) -> str:
    """Hash of the run configuration, ignoring where and how fast it runs."""
    return _sha256(config.model_dump(mode="json", exclude={"output_dir", "parallelism"}))


def pipeline_hash(template: str) -> str:
    """Hash of everything that decides an outcome besides the candidate itself."""
    scenarios = {tc.value: serialize_scenario(instantiate_tc(tc)) for tc in TestCaseId}
    return _sha256(
        {
            "version": __version__,
            "dt": DT,
            "template": hashlib.sha256(template.encode("utf-8")).hexdigest(),
            "scenarios": scenarios,
            "thresholds": dataclasses.asdict(GOAL_THRESHOLDS),
            "tick_deadline_ms": settings.TICK_DEADLINE_MS,
            "caem_allow_brake": settings.CAEM_ALLOW_BRAKE,
            "extraction_heuristic": settings.EXTRACTION_HEURISTIC,
        }
    )


# Matrix report


def summarize_cell(
    model: str,
    function_id: FunctionId,
    outcomes: List[EvaluationOutcome],
    repeats: int,
    complete: bool,
    note: Optional[str] = None,
) -> CellSummary:
    """Aggregate the outcomes of one (model, function) cell."""
    bands = {stage: sum(1 for o in outcomes if o.stage == stage) for stage in BAND_ORDER}
    counts = CellCounts(
        compiled=sum(1 for o in outcomes if o.stage != Stage.NON_COMPILABLE),
        executed=bands[Stage.PASSED] + bands[Stage.EXECUTED_FAILED],
        passed=bands[Stage.PASSED],
    )

    seen = {episode.tc_id for o in outcomes for episode in o.episodes}
    tc_ids = [tc for tc in TestCaseId if tc in seen] or list(cases_for(function_id))
    tc_passes = {
        tc: sum(
            1
            for o in outcomes
            for episode in o.episodes
            if episode.tc_id == tc and episode.verdict.overall
        )
        for tc in tc_ids
    }

    histogram: Dict[FailureMode, int] = {}
    for mode in FailureMode:
        total = sum(1 for o in outcomes for item in o.failure_modes if item.mode == mode)
        if total:
            histogram[mode] = total

    n = len(outcomes)
    pass_at_k = {k: compute_pass_at_k(n, counts.passed, k) for k in PASS_AT_K if k <= n}

    return CellSummary(
        model=model,
        function_id=function_id,
        repeats=repeats,
        attempts=n,
        complete=complete,
        counts=counts,
        bands=bands,
        tc_passes=tc_passes,
        failure_histogram=histogram,
        pass_at_k=pass_at_k,
        ranking=[o.meta.attempt for o in rank_candidates(outcomes)],
        note=note,
    )


def _cell_note(entry: Optional[Dict[str, Any]]) -> Optional[str]:
    if entry is None:
        return "cell not finished"
    if entry.get("note"):
        return str(entry["note"])
    failed = entry.get("failed_attempts") or []
    if failed:
        return f"{len(failed)} provider attempt(s) failed"
    return None


def build_matrix_report(run_dir: Path) -> Tuple[MatrixReport, Dict[str, Any]]:
    """
    Summarize a run directory.

    Args:
        run_dir: Directory written by ``matrix`` or ``evaluate``

    Returns:
        tuple: (report body, header with the run start time)

    Raises:
        ConfigurationError: If the directory holds no run or no outcomes
    """
    run = read_run_file(run_dir)
    journal = RunJournal(run_dir)
    keys = sorted(set(journal.outcomes) | set(journal.cells), key=lambda c: (c[0], c[1].value))
    if not keys:
        raise ConfigurationError(f"run directory {run_dir} holds no evaluated candidates")

    default_repeats = int(run.get("config", {}).get("repeats", 0))
    cells = []
    for model, function_id in keys:
        entry = journal.cells.get((model, function_id))
        cells.append(
            summarize_cell(
                model,
                function_id,
                journal.outcomes_for(model, function_id),
                repeats=int(entry["repeats"]) if entry else default_repeats,
                complete=journal.cell_complete(model, function_id),
                note=_cell_note(entry),
            )
        )
    cells.sort(key=lambda cell: (-cell.counts.passed, cell.model, cell.function_id.value))

    report = MatrixReport(
        run_id=str(run.get("run_id", run_dir.name)),
        config_hash=str(run.get("config_hash", "")),
        pipeline_hash=str(run.get("pipeline_hash", "")),
        cells=cells,
    )
    header = {"generated_at": run.get("started_at")}
    return report, header


def render_report_json(report: MatrixReport, header: Dict[str, Any]) -> str:
    payload = {"header": header, "body": report.model_dump(mode="json")}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _rate(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.3f}"


def render_table(report: MatrixReport) -> str:
    """
    Text table, one row per cell, most passing candidates first.

    Bands read passed, executed_failed, non_executable, non_compilable.
    """
    width = max([len("model"), *(len(cell.model) for cell in report.cells)])
    lines = [
        f"run {report.run_id}  config {report.config_hash[:12]}  "
        f"pipeline {report.pipeline_hash[:12]}",
        "",
        f"{'model':<{width}}  fn  {'n':>3}  {'pass':>4}  {'fail':>4}  {'nexe':>4}  "
        f"{'ncmp':>4}  {'pass@1':>6}  {'pass@5':>6}  {'pass@10':>7}  status",
    ]
    for cell in report.cells:
        status = "complete" if cell.complete else f"INCOMPLETE: {cell.note or 'unknown'}"
        bands = "  ".join(f"{cell.bands.get(stage, 0):>4}" for stage in BAND_ORDER)
        lines.append(
            f"{cell.model:<{width}}  {cell.function_id.value}  {cell.attempts:>3}  {bands}  "
            f"{_rate(cell.pass_at_k.get(1)):>6}  {_rate(cell.pass_at_k.get(5)):>6}  "
            f"{_rate(cell.pass_at_k.get(10)):>7}  {status}"
        )

    lines.extend(["", "failure modes"])
    for cell in report.cells:
        if not cell.failure_histogram:
            continue
        modes = ", ".join(f"{mode.value}={count}" for mode, count in cell.failure_histogram.items())
        lines.append(f"  {cell.model} {cell.function_id.value}: {modes}")
    return "\n".join(lines) + "\n"


def write_report(run_dir: Path) -> MatrixReport:
    """
    Write report.json and report.txt into the run directory.

    Raises:
        ConfigurationError: If the directory holds no run
        InfrastructureError: If the files cannot be written
    """
    report, header = build_matrix_report(run_dir)
    try:
        (run_dir / REPORT_JSON).write_text(render_report_json(report, header), encoding="utf-8")
        (run_dir / REPORT_TEXT).write_text(render_table(report), encoding="utf-8")
    except OSError as e:
        raise InfrastructureError(f"cannot write report into {run_dir}: {e}") from e
    logger.info(
        "report_written",
        run_dir=str(run_dir),
        cells=len(report.cells),
        incomplete=sum(1 for cell in report.cells if not cell.complete),
    )
    return report
