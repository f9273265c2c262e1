"""
Tests for per-candidate records, run hashes and matrix reports.
"""
import copy

import pytest

from app.core.errors import ConfigurationError, SchemaViolationError
from app.models.candidate import CandidateMeta, ExtractionFailure
from app.models.evaluation import FailureMode, MatrixReport, RunConfig, Stage
from app.models.scenario import FunctionId, TestCaseId
from app.services.journal import write_run_file
from app.services.orchestrator import evaluate_candidate, extraction_outcome
from app.services.reporting import (
    build_matrix_report,
    build_record,
    config_hash,
    pipeline_hash,
    render_table,
    summarize_cell,
    validate_record,
)

META = CandidateMeta(model="m", function_id=FunctionId.F1, attempt=1)


def no_code_outcome(attempt: int = 1):
    meta = META.model_copy(update={"attempt": attempt})
    return extraction_outcome(ExtractionFailure(reason="no code emitted", meta=meta))


class TestRecords:
    """Test the per-candidate JSON record."""

    def test_extraction_failure_record(self):
        """Test the record of a response without code."""
        record = build_record(no_code_outcome())
        assert record["stage"] == "non_compilable"
        assert record["compile"] is None
        assert record["per_tc"] == []
        assert record["failure_modes"][0]["mode"] == FailureMode.NO_CODE_EMITTED.value
        assert record["extraction_failure"] == "no code emitted"

    async def test_evaluated_record(self, candidate, python_adapter):
        """Test that an evaluated candidate gives one entry per test case."""
        outcome = await evaluate_candidate(
            candidate("golden_f1.py", FunctionId.F1), FunctionId.F1, python_adapter
        )
        record = build_record(outcome)
        (entry,) = record["per_tc"]
        assert entry["tc_id"] == "S1"
        assert entry["R1"]["status"] == "pass"
        assert entry["R4"]["status"] == "skipped"
        assert entry["overall"] is True
        assert len(entry["trace_hash"]) == 64

    def test_schema_violation_names_the_path(self):
        """Test that an invalid record is rejected with its JSON path."""
        record = copy.deepcopy(build_record(no_code_outcome()))
        record["meta"]["attempt"] = 0
        with pytest.raises(SchemaViolationError) as exc_info:
            validate_record(record)
        assert "meta/attempt" in exc_info.value.message

    def test_unknown_field_rejected(self):
        """Test that records carry no undeclared fields."""
        record = build_record(no_code_outcome())
        record["score"] = 1
        with pytest.raises(SchemaViolationError):
            validate_record(record)


class TestHashes:
    """Test the run and pipeline hashes."""

    def test_config_hash_ignores_output_and_parallelism(self):
        """Test that where and how fast a run executes does not change its hash."""
        base = RunConfig(repeats=5)
        moved = RunConfig(repeats=5, output_dir="/elsewhere", parallelism=8)
        assert config_hash(base) == config_hash(moved)
        assert config_hash(base) != config_hash(RunConfig(repeats=6))

    def test_pipeline_hash_follows_template(self):
        """Test that a different prompt template gives a different pipeline hash."""
        assert pipeline_hash("a {{FUNCTION_DESCRIPTION}}") == pipeline_hash(
            "a {{FUNCTION_DESCRIPTION}}"
        )
        assert pipeline_hash("a {{FUNCTION_DESCRIPTION}}") != pipeline_hash(
            "b {{FUNCTION_DESCRIPTION}}"
        )


class TestMatrixReport:
    """Test cell summaries and report rendering."""

    def test_summarize_cell(self):
        """Test counts, bands and pass@k of a cell without executable candidates."""
        cell = summarize_cell(
            "m", FunctionId.F1, [no_code_outcome(1), no_code_outcome(2)], repeats=2, complete=True
        )
        assert cell.attempts == 2
        assert cell.counts.compiled == 0
        assert cell.bands[Stage.NON_COMPILABLE] == 2
        assert cell.tc_passes == {TestCaseId.S1: 0}
        assert cell.failure_histogram == {FailureMode.NO_CODE_EMITTED: 2}
        assert cell.pass_at_k == {1: 0.0}
        assert cell.ranking == [1, 2]

    def test_table_marks_incomplete_cells(self):
        """Test that an unfinished cell is flagged in the table."""
        cell = summarize_cell(
            "model-x",
            FunctionId.F1,
            [no_code_outcome()],
            repeats=3,
            complete=False,
            note="cell not finished",
        )
        report = MatrixReport(
            run_id="r", config_hash="c" * 64, pipeline_hash="p" * 64, cells=[cell]
        )
        table = render_table(report)
        assert table.startswith("run r  config cccccccccccc  pipeline pppppppppppp")
        assert "INCOMPLETE: cell not finished" in table
        assert "model-x F1: NO_CODE_EMITTED=1" in table

    def test_not_a_run_directory(self, tmp_path):
        """Test that a directory without run.json is a configuration error."""
        with pytest.raises(ConfigurationError):
            build_matrix_report(tmp_path)

    def test_run_without_outcomes(self, runs_dir):
        """Test that a run that evaluated nothing cannot be reported."""
        run_dir = runs_dir / "empty"
        write_run_file(run_dir, RunConfig(run_id="empty"), "c", "p")
        with pytest.raises(ConfigurationError) as exc_info:
            build_matrix_report(run_dir)
        assert "no evaluated candidates" in exc_info.value.message
