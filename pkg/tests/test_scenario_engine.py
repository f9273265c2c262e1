"""
Tests for scenario instantiation, cut-in calibration and scenario files.
"""
import pytest

from app.core.errors import (
    InfeasibleCutinError,
    ScenarioError,
    UnknownAgentError,
    ValidationError,
)
from app.models.protocol import ControlRequest
from app.models.scenario import TestCaseId
from app.models.sim import TerminalKind
from app.services.closed_loop import measure_time_to_brake, roll_out
from app.services.scenario_engine import (
    ScriptCursor,
    cutin_tick,
    initial_world,
    instantiate_tc,
    kph,
    load_scenario,
    load_scenario_file,
    serialize_scenario,
    shipped_scenario_path,
    solve_cutin_parameters,
)

MINIMAL = """
[scenario]
id = mini
horizon = 5

[vehicle ego]
s = 0
lane = -3
speed = 10
"""


class TestInstantiation:
    """Test the shipped test cases."""

    def test_tc1_placement(self):
        """Test the ego placement and the overtaking cutter of TC1."""
        scenario = instantiate_tc(TestCaseId.TC1)
        ego, cutter = scenario.placements
        assert (ego.id, ego.s, ego.lane_id) == ("ego", 100.0, -3)
        assert ego.speed == kph(120.0)
        assert cutter.lane_id == -2
        assert cutter.speed == pytest.approx(ego.speed + 5.0)
        assert cutin_tick(scenario) == 100

    @pytest.mark.parametrize("tc_id", [TestCaseId.TC1, TestCaseId.TC2, TestCaseId.TC3])
    def test_cutin_is_calibrated_to_time_to_brake(self, tc_id):
        """Test that the latest safe brake onset after cut-in is 0.4 s."""
        ttb = measure_time_to_brake(instantiate_tc(tc_id))
        assert ttb == pytest.approx(0.4, abs=0.05)

    @pytest.mark.parametrize(
        "tc_id", [TestCaseId.TC1, TestCaseId.TC2, TestCaseId.TC3, TestCaseId.TC4, TestCaseId.TC5]
    )
    def test_idle_ego_collides_in_threat_cases(self, tc_id):
        """Test that doing nothing ends in a collision wherever action is needed."""
        trace = roll_out(instantiate_tc(tc_id), lambda world: ControlRequest())
        assert trace.terminal.kind == TerminalKind.COLLISION

    @pytest.mark.parametrize("tc_id", [TestCaseId.TC6, TestCaseId.TC7])
    def test_idle_ego_completes_empty_road(self, tc_id):
        """Test that doing nothing is safe on the empty-road cases."""
        trace = roll_out(instantiate_tc(tc_id), lambda world: ControlRequest())
        assert trace.terminal.kind == TerminalKind.COMPLETED
        assert len(trace.snapshots) == 600

    def test_tc7_oncoming_vehicle(self):
        """Test that TC7 places oncoming traffic on the non-drivable lane."""
        scenario = instantiate_tc(TestCaseId.TC7)
        oncoming = scenario.placements[1]
        assert oncoming.heading == -1
        assert oncoming.lane_id == -1
        assert not scenario.road.is_drivable(-1)

    def test_s2_lane_override(self):
        """Test that S2 accepts an ego lane override."""
        scenario = instantiate_tc(TestCaseId.S2, {"ego_lane": -3})
        assert scenario.ego.lane_id == -3
        assert scenario.placements[1].lane_id == -3

    def test_unknown_override_rejected(self):
        """Test that unknown overrides raise ValidationError."""
        with pytest.raises(ValidationError):
            instantiate_tc(TestCaseId.TC1, {"weather": 1.0})

    def test_infeasible_cutin(self):
        """Test that an unreachable time-to-brake raises InfeasibleCutinError."""
        with pytest.raises(InfeasibleCutinError):
            solve_cutin_parameters(kph(120.0), 20.0)

    @pytest.mark.parametrize("ego_speed_kph", [80.0, 100.0, 120.0])
    def test_longer_time_to_brake_needs_a_wider_gap(self, ego_speed_kph):
        """Test that the calibrated gap grows with the time-to-brake target."""
        short = solve_cutin_parameters(kph(ego_speed_kph), 0.4)
        long = solve_cutin_parameters(kph(ego_speed_kph), 0.8)
        assert long.gap_at_cutin > short.gap_at_cutin

    @pytest.mark.parametrize("tc_id", [TestCaseId.TC4, TestCaseId.TC5])
    def test_blocker_is_abreast_at_cut_in(self, tc_id):
        """Test that the blocker occupies the left lane within 10 m of the ego at cut-in."""
        scenario = instantiate_tc(tc_id)
        tick = cutin_tick(scenario)
        trace = roll_out(scenario, lambda world: ControlRequest())
        world = next(snapshot.world for snapshot in trace.snapshots if snapshot.tick == tick)
        blocker = world.vehicle("blocker")
        assert blocker.lane_id == -2
        assert abs(blocker.s - world.ego.s) <= 10.0

    def test_script_events_fire_once(self):
        """Test that an event fires exactly once however often the cursor advances."""
        scenario = instantiate_tc(TestCaseId.TC1)
        cursor = ScriptCursor(scenario)
        world = initial_world(scenario)
        first = cursor.advance_script(3.0, world)
        assert [action.kind.value for action in first["cutter"]] == [
            "set_accel",
            "set_accel",
            "lane_change",
        ]
        assert cursor.advance_script(3.0, world) == {}
        assert not cursor.exhausted


class TestScenarioFiles:
    """Test the scenario text format."""

    @pytest.mark.parametrize("tc_id", list(TestCaseId))
    def test_serialized_scenarios_load_back(self, tc_id):
        """Test that parsing a serialized scenario gives the same scenario."""
        scenario = instantiate_tc(tc_id)
        assert load_scenario(serialize_scenario(scenario)) == scenario

    @pytest.mark.parametrize("tc_id", list(TestCaseId))
    def test_shipped_files_parse(self, tc_id):
        """Test that every shipped scenario file loads with its own id."""
        scenario = load_scenario_file(shipped_scenario_path(tc_id))
        assert scenario.id == tc_id.value
        assert scenario.ego.id == "ego"

    def test_defaults_applied(self):
        """Test that omitted road and vehicle keys take their defaults."""
        scenario = load_scenario(MINIMAL)
        assert scenario.road.drivable_lanes == [-4, -3, -2]
        assert scenario.road.lane_width == 3.5
        assert scenario.ego.length == 5.0
        assert scenario.horizon == 5.0

    def test_syntax_error_reports_line(self):
        """Test that a malformed line is reported with its position."""
        text = MINIMAL + "speed 12\n"
        with pytest.raises(ScenarioError) as exc_info:
            load_scenario(text)
        assert exc_info.value.line == len(text.splitlines())

    def test_unknown_key_reports_column(self):
        """Test that unknown keys are rejected with line and column."""
        text = MINIMAL + "  colour = red\n"
        with pytest.raises(ScenarioError) as exc_info:
            load_scenario(text)
        assert exc_info.value.line == len(text.splitlines())
        assert exc_info.value.column == 12
        assert "colour" in exc_info.value.message

    def test_unknown_agent(self):
        """Test that events naming an unplaced agent raise UnknownAgentError."""
        text = MINIMAL + "\n[event 1]\nt = 1.0\nagent = ghost\naction = hold\n"
        with pytest.raises(UnknownAgentError) as exc_info:
            load_scenario(text)
        assert exc_info.value.line == len(text.splitlines()) - 1

    def test_non_drivable_start_is_a_warning(self):
        """Test that a placement off the drivable lanes parses with a warning."""
        text = MINIMAL + "\n[vehicle other]\ns = 50\nlane = -1\nspeed = 10\nheading = -1\n"
        warnings = []
        scenario = load_scenario(text, warnings)
        assert len(scenario.placements) == 2
        assert warnings == ["vehicle 'other' starts on non-drivable lane -1"]

    def test_events_are_sorted_stably(self):
        """Test that events are ordered by time, ties in file order."""
        text = MINIMAL + (
            "\n[event a]\nt = 2.0\nagent = ego\naction = set_accel(1.0)\n"
            "\n[event b]\nt = 1.0\nagent = ego\naction = hold\n"
            "\n[event c]\nt = 2.0\nagent = ego\naction = lane_change(left)\n"
        )
        script = load_scenario(text).script
        assert [event.action.describe() for event in script] == [
            "hold",
            "set_accel(1.0)",
            "lane_change(left)",
        ]
