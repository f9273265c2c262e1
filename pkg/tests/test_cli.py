"""
Tests for the command-line entry point.
"""
import json

import pytest

from app import __version__
from app.main import main
from app.services.traces import CSV_COLUMNS
from tests.conftest import CONTROLLERS_DIR, REPLAYS_DIR


class TestEvaluateCommand:
    """Test ``silgate evaluate``."""

    def test_version(self, capsys):
        """Test that --version prints the package version."""
        with pytest.raises(SystemExit) as exc_info:
            main(["--version"])
        assert exc_info.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_passing_candidate(self, capsys):
        """Test that a passing candidate exits 0 and prints its record."""
        code = main(
            ["evaluate", "--candidate", str(CONTROLLERS_DIR / "golden_f1.py"), "--function", "F1"]
        )
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert record["stage"] == "passed"
        assert record["meta"]["model"] == "local"

    def test_failing_candidate(self, capsys):
        """Test that a failing candidate exits 1."""
        code = main(
            [
                "evaluate",
                "--candidate",
                str(CONTROLLERS_DIR / "alternative_strategy.py"),
                "--function",
                "F1",
            ]
        )
        assert code == 1
        assert json.loads(capsys.readouterr().out)["stage"] == "executed_failed"

    def test_candidate_needs_one_function(self):
        """Test that --candidate without --function is a configuration error."""
        assert main(["evaluate", "--candidate", str(CONTROLLERS_DIR / "golden_f1.py")]) == 2

    def test_record_written_to_file(self, tmp_path, capsys):
        """Test that --output writes the record instead of printing it."""
        output = tmp_path / "record.json"
        code = main(
            [
                "evaluate",
                "--candidate",
                str(CONTROLLERS_DIR / "golden_f1.py"),
                "--function",
                "F1",
                "--output",
                str(output),
            ]
        )
        assert code == 0
        assert capsys.readouterr().out == ""
        assert json.loads(output.read_text())["per_tc"][0]["tc_id"] == "S1"


class TestReplayTraceCommand:
    """Test ``silgate replay-trace``."""

    @pytest.fixture
    def trace_file(self, tmp_path, capsys):
        traces = tmp_path / "traces"
        main(
            [
                "evaluate",
                "--candidate",
                str(CONTROLLERS_DIR / "golden_f1.py"),
                "--function",
                "F1",
                "--traces-dir",
                str(traces),
            ]
        )
        capsys.readouterr()
        return traces / "s1.jsonl"

    def test_csv_export(self, trace_file, capsys):
        """Test that the CSV export has a header and one row per tick."""
        assert main(["replay-trace", str(trace_file), "--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1].startswith("0,0.00,")
        assert len(lines) > 2

    def test_timeline_export(self, trace_file, capsys):
        """Test that the timeline starts with the scenario header."""
        assert main(["replay-trace", str(trace_file)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("scenario S1")
        assert "brake" in out

    def test_missing_trace(self, tmp_path):
        """Test that an unreadable trace exits 2."""
        assert main(["replay-trace", str(tmp_path / "missing.jsonl")]) == 2


class TestRunCommands:
    """Test ``matrix``, ``report`` and ``generate`` over replayed responses."""

    def test_matrix_then_report(self, runs_dir, capsys):
        """Test that a replayed matrix exits 1 on failures and report rebuilds the table."""
        args = ["--replay", str(REPLAYS_DIR), "--function", "F1", "--repeats", "3"]
        args += ["--output-dir", str(runs_dir), "--run-id", "cli"]
        assert main(["matrix", *args]) == 1
        table = capsys.readouterr().out
        assert "model-a" in table
        assert "model-b" in table

        assert main(["report", str(runs_dir / "cli")]) == 1
        assert capsys.readouterr().out == table

    def test_report_on_empty_directory(self, tmp_path):
        """Test that a directory without a run exits 2."""
        assert main(["report", str(tmp_path)]) == 2

    def test_generate_stores_responses(self, runs_dir, capsys):
        """Test that generate lays responses out for replay."""
        args = ["--replay", str(REPLAYS_DIR), "--function", "F1", "--repeats", "2"]
        args += ["--output-dir", str(runs_dir), "--run-id", "gen"]
        assert main(["generate", *args]) == 0
        root = runs_dir / "gen" / "responses"
        assert capsys.readouterr().out.strip() == str(root)
        assert (root / "model-a" / "F1" / "attempt_002.txt").is_file()
        extraction = json.loads((root / "model-b" / "F1" / "extraction.json").read_text())
        assert [entry["extracted"] for entry in extraction["attempts"]] == [True, False]
