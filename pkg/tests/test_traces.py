"""
Tests for trace serialization, parsing and exports.
"""
import pytest

from app.core.errors import TraceParseError
from app.models.protocol import ControlRequest
from app.models.scenario import TestCaseId
from app.services.closed_loop import roll_out
from app.services.scenario_engine import instantiate_tc
from app.services.traces import (
    CSV_COLUMNS,
    parse_trace,
    render_csv,
    render_timeline,
    serialize_trace,
)


@pytest.fixture(scope="module")
def lane_change_trace():
    scenario = instantiate_tc(TestCaseId.S2)
    return roll_out(
        scenario, lambda world: ControlRequest(switch_lane=-1 if world.tick == 3 else 0)
    )


class TestSerialization:
    """Test the JSONL trace file."""

    def test_parse_restores_the_trace(self, lane_change_trace):
        """Test that a parsed trace serializes to the same bytes."""
        text = serialize_trace(lane_change_trace)
        assert serialize_trace(parse_trace(text)) == text

    def test_record_order(self, lane_change_trace):
        """Test header first, one tick line per snapshot, terminal last."""
        lines = serialize_trace(lane_change_trace).splitlines()
        assert lines[0].startswith('{"type":"header"')
        assert lines[-1].startswith('{"type":"terminal"')
        assert len(lines) == len(lane_change_trace.snapshots) + 2

    def test_corrupt_line_reports_offset(self, lane_change_trace):
        """Test that a broken line is reported at its byte offset."""
        lines = serialize_trace(lane_change_trace).splitlines(keepends=True)
        offset = len(lines[0].encode("utf-8")) + len(lines[1].encode("utf-8"))
        lines[2] = "{not json\n"
        with pytest.raises(TraceParseError) as exc_info:
            parse_trace("".join(lines))
        assert exc_info.value.offset == offset

    def test_missing_terminal(self, lane_change_trace):
        """Test that a truncated trace is rejected."""
        lines = serialize_trace(lane_change_trace).splitlines(keepends=True)
        with pytest.raises(TraceParseError) as exc_info:
            parse_trace("".join(lines[:-1]))
        assert "terminal" in exc_info.value.message

    def test_empty_trace(self):
        """Test that an empty file is rejected at offset 0."""
        with pytest.raises(TraceParseError) as exc_info:
            parse_trace("")
        assert exc_info.value.offset == 0


class TestExports:
    """Test the review exports."""

    def test_csv_has_one_row_per_tick(self, lane_change_trace):
        """Test the CSV header and the request columns of the switching tick."""
        rows = render_csv(lane_change_trace).splitlines()
        assert rows[0] == ",".join(CSV_COLUMNS)
        assert len(rows) == len(lane_change_trace.snapshots) + 1
        assert "switch_lane" in rows[4]

    def test_timeline_shows_request_and_lane_change(self, lane_change_trace):
        """Test that the timeline lists the request and the completed lane step."""
        timeline = render_timeline(lane_change_trace)
        assert timeline.startswith("scenario S2")
        assert '"switch_lane":-1' in timeline
        assert "lane -2 -> -3" in timeline
