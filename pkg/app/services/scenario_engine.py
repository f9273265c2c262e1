"""
Scenario format, shipped test cases and cut-in calibration.

Scenario files are a small INI-like text format (see docs/SCENARIO_FORMAT.md):
``[scenario]``, ``[road]``, ``[vehicle <id>]`` and ``[event <label>]`` sections
holding ``key = value`` lines.
"""
import math
import re
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import structlog

from app.core.errors import InfeasibleCutinError, ScenarioError, UnknownAgentError, ValidationError
from app.models.protocol import ControlRequest
from app.models.scenario import (
    Action,
    ActionKind,
    CutinParams,
    FunctionId,
    Scenario,
    ScriptEvent,
    TestCaseId,
)
from app.models.sim import RoadSpec, VehicleState, WorldState
from app.services.simulation import (
    A_BRAKE,
    DT,
    T_LC,
    quantize,
    request_lane_change,
    step_longitudinal,
    step_world,
)

logger = structlog.get_logger()

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "resources" / "scenarios"

EGO_ID = "ego"
EGO_START_S = 100.0
EGO_LANE = -3
DEFAULT_HORIZON = 30.0
DEFAULT_LANE_WIDTH = 3.5
TTB_TARGET = 0.4
LEAD_DECEL = -6.0
CUTTER_OVERSPEED = 5.0
MATCH_START_T = 1.0  # cutter starts shedding its overspeed
CUTIN_START_T = 3.0
CUTIN_DONE_T = CUTIN_START_T + T_LC
MAX_GAP = 200.0
ONCOMING_DISTANCE = 400.0
EVENT_EPSILON = 1e-9

TC_SPEEDS_KPH: Dict[TestCaseId, float] = {
    TestCaseId.TC1: 120.0,
    TestCaseId.TC2: 80.0,
    TestCaseId.TC3: 40.0,
    TestCaseId.TC4: 120.0,
    TestCaseId.TC5: 120.0,
    TestCaseId.TC6: 80.0,
    TestCaseId.TC7: 80.0,
    TestCaseId.S2: 80.0,
}

OVERRIDE_KEYS = frozenset({"ego_speed", "ttb", "gap", "ego_lane", "horizon"})


def kph(value: float) -> float:
    """km/h to m/s at simulation precision."""
    return quantize(value / 3.6)


# --------------------------------------------------------------------------------------
# Script execution
# --------------------------------------------------------------------------------------


class ScriptCursor:
    """Fires a scenario's events in order, each exactly once."""

    def __init__(self, scenario: Scenario) -> None:
        self._events = scenario.script
        self._next = 0

    @property
    def exhausted(self) -> bool:
        return self._next >= len(self._events)

    def advance_script(self, t: float, world: WorldState) -> Dict[str, List[Action]]:
        """
        Fire every event with ``t_fire <= t`` not fired before.

        Args:
            t: Current simulation time (s)
            world: Current world (agents must exist)

        Returns:
            dict: agent id -> actions to apply now, in script order
        """
        overrides: Dict[str, List[Action]] = {}
        known = {vehicle.id for vehicle in world.vehicles}
        while self._next < len(self._events):
            event = self._events[self._next]
            if event.t_fire > t + EVENT_EPSILON:
                break
            self._next += 1
            if event.agent in known:
                overrides.setdefault(event.agent, []).append(event.action)
        return overrides


def apply_action(vehicle: VehicleState, action: Action) -> VehicleState:
    """Apply one scripted action to a vehicle."""
    if action.kind == ActionKind.SET_ACCEL:
        return vehicle.model_copy(update={"script_accel": action.accel})
    if action.kind == ActionKind.HOLD:
        return vehicle.model_copy(update={"script_accel": 0.0})
    return request_lane_change(vehicle, action.direction or 0)


def apply_overrides(world: WorldState, overrides: Dict[str, List[Action]]) -> WorldState:
    """Return the world with scripted actions applied."""
    if not overrides:
        return world
    vehicles = []
    for vehicle in world.vehicles:
        for action in overrides.get(vehicle.id, []):
            vehicle = apply_action(vehicle, action)
        vehicles.append(vehicle)
    return world.model_copy(update={"vehicles": vehicles})


def initial_world(scenario: Scenario) -> WorldState:
    """World at tick 0."""
    return WorldState(tick=0, t=0.0, vehicles=list(scenario.placements), road=scenario.road)


def _advance_idle(scenario: Scenario, ticks: int) -> WorldState:
    """Run the script for some ticks with an idle ego."""
    cursor = ScriptCursor(scenario)
    world = initial_world(scenario)
    idle = ControlRequest()
    for _ in range(ticks):
        world = apply_overrides(world, cursor.advance_script(world.t, world))
        world = step_world(world, idle)
    return world


def cutin_tick(scenario: Scenario) -> Optional[int]:
    """Tick at which the first scripted lane change of a non-ego agent completes."""
    ego_id = scenario.ego.id
    for event in scenario.script:
        if event.agent != ego_id and event.action.kind == ActionKind.LANE_CHANGE:
            return round((event.t_fire + T_LC) / DT)
    return None


# --------------------------------------------------------------------------------------
# Cut-in calibration
# --------------------------------------------------------------------------------------


def _onset_is_safe(ego_speed: float, gap: float, onset: int, lead_decel: float) -> bool:
    """Ego and lead start at ego_speed; lead decelerates at once, ego brakes after onset ticks."""
    length = 5.0
    s_ego, s_lead = 0.0, quantize(gap + length)
    v_ego = v_lead = ego_speed
    limit = onset + math.ceil(ego_speed / A_BRAKE / DT) + 2
    for tick in range(limit):
        accel = -A_BRAKE if tick >= onset else 0.0
        v_ego, ds_ego = step_longitudinal(v_ego, accel)
        v_lead, ds_lead = step_longitudinal(v_lead, lead_decel)
        s_ego = quantize(s_ego + ds_ego)
        s_lead = quantize(s_lead + ds_lead)
        if s_lead - s_ego < length:
            return False
        if v_ego == 0.0:
            return True
    return True


def _min_safe_gap(ego_speed: float, onset: int, lead_decel: float) -> Optional[float]:
    """Smallest gap in (0, MAX_GAP] that survives braking at ``onset``."""
    if not _onset_is_safe(ego_speed, MAX_GAP, onset, lead_decel):
        return None
    lo, hi = 0.0, MAX_GAP
    for _ in range(60):
        mid = (lo + hi) / 2
        if _onset_is_safe(ego_speed, mid, onset, lead_decel):
            hi = mid
        else:
            lo = mid
    return hi


@lru_cache(maxsize=64)
def solve_cutin_parameters(ego_speed: float, ttb_target: float) -> CutinParams:
    """
    Find the cut-in gap whose latest collision-free brake onset equals ttb_target.

    The lead completes its cut-in at ego speed and brakes at LEAD_DECEL; the ego
    keeps its speed and brakes fully after the onset delay. Onsets are whole
    ticks, so the gap is the midpoint of the interval in which the latest safe
    onset is round(ttb_target / dt) ticks.

    Args:
        ego_speed: Ego (and lead) speed at cut-in (m/s)
        ttb_target: Time-to-brake to reproduce (s)

    Returns:
        CutinParams: Calibrated parameters

    Raises:
        InfeasibleCutinError: If no gap in (0, 200] m reproduces the target
    """
    if ego_speed <= 0 or ttb_target <= 0:
        raise ValidationError("ego_speed and ttb_target must be positive")

    onset = round(ttb_target / DT)
    low = _min_safe_gap(ego_speed, onset, LEAD_DECEL)
    if low is None:
        raise InfeasibleCutinError(
            f"no cut-in gap up to {MAX_GAP:g} m gives a time-to-brake of {ttb_target:g} s"
        )
    high = _min_safe_gap(ego_speed, onset + 1, LEAD_DECEL)
    if high is None:
        high = MAX_GAP
    gap = round((low + high) / 2, 3)
    logger.debug(
        "cutin_solved", ego_speed=ego_speed, ttb=ttb_target, gap=gap, low=low, high=high
    )
    return CutinParams(
        ego_speed=ego_speed,
        lead_overspeed=CUTTER_OVERSPEED,
        gap_at_cutin=gap,
        lead_decel=LEAD_DECEL,
        ttb_target=ttb_target,
    )


# --------------------------------------------------------------------------------------
# Shipped test cases
# --------------------------------------------------------------------------------------


def _ego(speed: float, lane: int = EGO_LANE, script_accel: float = 0.0) -> VehicleState:
    return VehicleState(
        id=EGO_ID, s=EGO_START_S, lane_id=lane, speed=speed, script_accel=script_accel
    )


def _cutin_script(cutin: CutinParams, overtakes: bool) -> List[ScriptEvent]:
    events = []
    if overtakes and cutin.lead_overspeed > 0:
        shed = -cutin.lead_overspeed / (CUTIN_START_T - MATCH_START_T)
        shedding = Action(kind=ActionKind.SET_ACCEL, accel=shed)
        events.append(_event(MATCH_START_T, "cutter", shedding))
        events.append(_event(CUTIN_START_T, "cutter", Action(kind=ActionKind.SET_ACCEL, accel=0.0)))
    cut_in = Action(kind=ActionKind.LANE_CHANGE, direction=-1)
    events.append(_event(CUTIN_START_T, "cutter", cut_in))
    events.append(
        _event(CUTIN_DONE_T, "cutter", Action(kind=ActionKind.SET_ACCEL, accel=cutin.lead_decel))
    )
    return events


def _event(t_fire: float, agent: str, action: Action) -> ScriptEvent:
    return ScriptEvent(t_fire=t_fire, agent=agent, action=action)


def _overtaking_cutter(
    tc_id: TestCaseId, ego_speed: float, cutin: CutinParams, horizon: float
) -> Tuple[VehicleState, List[ScriptEvent], float]:
    """Place the cutter so the gap at cut-in completion equals the calibrated gap."""
    script = _cutin_script(cutin, overtakes=True)
    rehearsal = Scenario(
        id=f"{tc_id.value}-rehearsal",
        placements=[
            _ego(ego_speed),
            VehicleState(id="cutter", s=0.0, lane_id=-2, speed=ego_speed + cutin.lead_overspeed),
        ],
        script=script,
        horizon=horizon,
    )
    at_cutin = _advance_idle(rehearsal, round(CUTIN_DONE_T / DT))
    ego_travel = at_cutin.ego.s - EGO_START_S
    cutter_travel = at_cutin.vehicle("cutter").s
    s_cutter = quantize(EGO_START_S + ego_travel - cutter_travel + cutin.gap_at_cutin + 5.0)
    cutter = VehicleState(
        id="cutter", s=s_cutter, lane_id=-2, speed=ego_speed + cutin.lead_overspeed
    )
    return cutter, script, at_cutin.ego.s


def instantiate_tc(
    tc_id: TestCaseId, params: Optional[Dict[str, float]] = None
) -> Scenario:
    """
    Build a shipped scenario.

    Args:
        tc_id: TC1..TC7, S1 or S2
        params: Optional overrides: ego_speed (m/s), ttb (s), gap (m, skips the
            solver), ego_lane (S2 only), horizon (s)

    Returns:
        Scenario: The instantiated scenario

    Raises:
        ValidationError: On unknown override keys
    """
    tc_id = TestCaseId(tc_id)
    params = dict(params or {})
    unknown = set(params) - OVERRIDE_KEYS
    if unknown:
        raise ValidationError(f"unknown scenario overrides: {', '.join(sorted(unknown))}")

    if tc_id == TestCaseId.S1:
        ego_speed = params.get("ego_speed", 5.0)
    else:
        ego_speed = params.get("ego_speed", kph(TC_SPEEDS_KPH[tc_id]))
    default_horizon = {TestCaseId.S1: 10.0, TestCaseId.S2: 20.0}.get(tc_id, DEFAULT_HORIZON)
    horizon = params.get("horizon", default_horizon)

    builder = _BUILDERS[tc_id]
    scenario = builder(tc_id, ego_speed, horizon, params)
    logger.debug("scenario_instantiated", tc_id=tc_id.value, vehicles=len(scenario.placements))
    return scenario


def _calibrated(ego_speed: float, params: Dict[str, float]) -> CutinParams:
    if "gap" in params:
        return CutinParams(
            ego_speed=ego_speed,
            lead_overspeed=CUTTER_OVERSPEED,
            gap_at_cutin=params["gap"],
            lead_decel=LEAD_DECEL,
            ttb_target=params.get("ttb", TTB_TARGET),
        )
    return solve_cutin_parameters(ego_speed, params.get("ttb", TTB_TARGET))


def _build_cutin(
    tc_id: TestCaseId, ego_speed: float, horizon: float, params: Dict[str, float]
) -> Scenario:
    cutin = _calibrated(ego_speed, params)
    cutter, script, ego_at_cutin = _overtaking_cutter(tc_id, ego_speed, cutin, horizon)
    placements = [_ego(ego_speed), cutter]
    functions = [FunctionId.F3, FunctionId.F4]
    if tc_id == TestCaseId.TC4:
        # static blocker abreast of the ego at cut-in time
        placements.append(
            VehicleState(id="blocker", s=round(ego_at_cutin + 5.0, 3), lane_id=-2, speed=0.0)
        )
        functions = [FunctionId.F4]
    return Scenario(
        id=tc_id.value, placements=placements, script=script, horizon=horizon, functions=functions
    )


def _build_escorted(
    tc_id: TestCaseId, ego_speed: float, horizon: float, params: Dict[str, float]
) -> Scenario:
    """TC5: the cutter already drives at ego speed, a blocker escorts the ego on the left."""
    cutin = _calibrated(ego_speed, params)
    cutter = VehicleState(
        id="cutter", s=quantize(EGO_START_S + cutin.gap_at_cutin + 5.0), lane_id=-2, speed=ego_speed
    )
    blocker = VehicleState(id="blocker", s=EGO_START_S, lane_id=-2, speed=ego_speed)
    return Scenario(
        id=tc_id.value,
        placements=[_ego(ego_speed), cutter, blocker],
        script=_cutin_script(cutin, overtakes=False),
        horizon=horizon,
        functions=[FunctionId.F4],
    )


def _build_empty(
    tc_id: TestCaseId, ego_speed: float, horizon: float, params: Dict[str, float]
) -> Scenario:
    placements = [_ego(ego_speed)]
    if tc_id == TestCaseId.TC7:
        # oncoming traffic on the non-drivable parallel lane
        placements.append(
            VehicleState(
                id="oncoming",
                s=EGO_START_S + ONCOMING_DISTANCE,
                lane_id=-1,
                speed=ego_speed,
                heading=-1,
            )
        )
    return Scenario(
        id=tc_id.value,
        placements=placements,
        horizon=horizon,
        functions=[FunctionId.F3, FunctionId.F4],
    )


def _build_s1(
    tc_id: TestCaseId, ego_speed: float, horizon: float, params: Dict[str, float]
) -> Scenario:
    return Scenario(
        id=tc_id.value,
        placements=[_ego(ego_speed, script_accel=2.0)],
        horizon=horizon,
        functions=[FunctionId.F1],
    )


def _build_s2(
    tc_id: TestCaseId, ego_speed: float, horizon: float, params: Dict[str, float]
) -> Scenario:
    lane = int(params.get("ego_lane", -2))
    return Scenario(
        id=tc_id.value,
        placements=[
            _ego(ego_speed, lane=lane),
            VehicleState(id="lead", s=EGO_START_S + 60.0, lane_id=lane, speed=10.0),
        ],
        horizon=horizon,
        functions=[FunctionId.F2],
    )


_Builder = Callable[[TestCaseId, float, float, Dict[str, float]], Scenario]

_BUILDERS: Dict[TestCaseId, _Builder] = {
    TestCaseId.TC1: _build_cutin,
    TestCaseId.TC2: _build_cutin,
    TestCaseId.TC3: _build_cutin,
    TestCaseId.TC4: _build_cutin,
    TestCaseId.TC5: _build_escorted,
    TestCaseId.TC6: _build_empty,
    TestCaseId.TC7: _build_empty,
    TestCaseId.S1: _build_s1,
    TestCaseId.S2: _build_s2,
}


# --------------------------------------------------------------------------------------
# Scenario files
# --------------------------------------------------------------------------------------

_SECTION_RE = re.compile(r"^\[\s*([a-z]+)(?:\s+([A-Za-z0-9_-]+))?\s*\]$")
_KEY_RE = re.compile(r"^([a-z_]+)\s*=\s*(.*)$")
_SET_ACCEL_RE = re.compile(r"^set_accel\(\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*\)$")
_LANE_CHANGE_RE = re.compile(r"^lane_change\(\s*(left|right)\s*\)$")

_VEHICLE_KEYS = {"s", "lane", "speed", "accel", "heading", "lat_offset", "length", "width"}
_EVENT_KEYS = {"t", "agent", "action"}
_SCENARIO_KEYS = {"id", "horizon", "functions"}
_ROAD_KEYS = {"drivable_lanes", "lane_width", "length"}


class _Section:
    def __init__(self, kind: str, label: Optional[str], line: int) -> None:
        self.kind = kind
        self.label = label
        self.line = line
        self.values: Dict[str, Tuple[str, int, int]] = {}


def _float(value: str, line: int, column: int) -> float:
    try:
        number = float(value)
    except ValueError:
        raise ScenarioError(f"expected a number, got {value!r}", line, column) from None
    if not math.isfinite(number):
        raise ScenarioError(f"expected a finite number, got {value!r}", line, column)
    return number


def _int(value: str, line: int, column: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ScenarioError(f"expected an integer, got {value!r}", line, column) from None


def _lanes(value: str, line: int, column: int) -> List[int]:
    if ".." in value:
        first, _, last = value.partition("..")
        lo, hi = sorted((_int(first.strip(), line, column), _int(last.strip(), line, column)))
        return list(range(lo, hi + 1))
    return [_int(part.strip(), line, column) for part in value.split(",") if part.strip()]


def _action(value: str, line: int, column: int) -> Action:
    match = _SET_ACCEL_RE.match(value)
    if match:
        return Action(kind=ActionKind.SET_ACCEL, accel=float(match.group(1)))
    match = _LANE_CHANGE_RE.match(value)
    if match:
        return Action(kind=ActionKind.LANE_CHANGE, direction=1 if match.group(1) == "left" else -1)
    if value == "hold":
        return Action(kind=ActionKind.HOLD)
    raise ScenarioError(f"unknown action {value!r}", line, column)


def _split_sections(text: str) -> List[_Section]:
    sections: List[_Section] = []
    current: Optional[_Section] = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        column = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            match = _SECTION_RE.match(stripped)
            if not match:
                raise ScenarioError(f"malformed section header {stripped!r}", number, column)
            current = _Section(match.group(1), match.group(2), number)
            sections.append(current)
            continue
        match = _KEY_RE.match(stripped)
        if not match:
            raise ScenarioError("expected 'key = value'", number, column)
        if current is None:
            raise ScenarioError("key outside of a section", number, column)
        key, value = match.group(1), match.group(2).strip()
        if key in current.values:
            raise ScenarioError(f"duplicate key {key!r}", number, column)
        value_column = column + len(stripped) - len(value)
        current.values[key] = (value, number, value_column)
    return sections


def _check_keys(section: _Section, allowed: set, required: set) -> None:
    for key, (_, line, column) in section.values.items():
        if key not in allowed:
            raise ScenarioError(f"unknown key {key!r} in [{section.kind}]", line, column)
    missing = required - set(section.values)
    if missing:
        raise ScenarioError(
            f"[{section.kind}] is missing {', '.join(sorted(missing))}", section.line, 1
        )


def load_scenario(text: str, warnings: Optional[List[str]] = None) -> Scenario:
    """
    Parse a scenario file.

    Args:
        text: Scenario file contents
        warnings: Optional list that collects non-fatal findings

    Returns:
        Scenario: Fully resolved scenario with defaults applied

    Raises:
        ScenarioError: On syntax errors, with line and column
        UnknownAgentError: When an event names an agent that is not placed
    """
    sections = _split_sections(text)
    scenario_id: Optional[str] = None
    horizon = DEFAULT_HORIZON
    functions: List[FunctionId] = []
    road = RoadSpec()
    placements: List[VehicleState] = []
    events: List[Tuple[float, int, ScriptEvent]] = []
    seen: set = set()

    for section in sections:
        if section.kind in ("scenario", "road") and section.kind in seen:
            raise ScenarioError(f"duplicate [{section.kind}] section", section.line, 1)
        seen.add(section.kind)

        if section.kind == "scenario":
            _check_keys(section, _SCENARIO_KEYS, {"id"})
            scenario_id = section.values["id"][0]
            if "horizon" in section.values:
                value, line, column = section.values["horizon"]
                horizon = _float(value, line, column)
                if horizon <= 0:
                    raise ScenarioError("horizon must be positive", line, column)
            if "functions" in section.values:
                value, line, column = section.values["functions"]
                try:
                    parts = [part.strip() for part in value.split(",")]
                    functions = [FunctionId(part) for part in parts if part]
                except ValueError:
                    raise ScenarioError(f"unknown function in {value!r}", line, column) from None

        elif section.kind == "road":
            _check_keys(section, _ROAD_KEYS, set())
            fields: Dict[str, object] = {}
            if "drivable_lanes" in section.values:
                fields["drivable_lanes"] = _lanes(*section.values["drivable_lanes"])
            for key in ("lane_width", "length"):
                if key in section.values:
                    fields[key] = _float(*section.values[key])
            try:
                road = RoadSpec(**fields)
            except ValueError as e:
                raise ScenarioError(f"invalid road: {e}", section.line, 1) from None

        elif section.kind == "vehicle":
            if not section.label:
                raise ScenarioError("[vehicle] needs an id", section.line, 1)
            if any(vehicle.id == section.label for vehicle in placements):
                raise ScenarioError(f"duplicate vehicle {section.label!r}", section.line, 1)
            _check_keys(section, _VEHICLE_KEYS, {"s", "lane", "speed"})
            values = section.values
            vehicle_fields: Dict[str, object] = {
                "id": section.label,
                "s": _float(*values["s"]),
                "lane_id": _int(*values["lane"]),
                "speed": _float(*values["speed"]),
            }
            if "accel" in values:
                vehicle_fields["script_accel"] = _float(*values["accel"])
            if "heading" in values:
                vehicle_fields["heading"] = _int(*values["heading"])
            for key in ("lat_offset", "length", "width"):
                if key in values:
                    vehicle_fields[key] = _float(*values[key])
            try:
                placements.append(VehicleState(**vehicle_fields))
            except ValueError as e:
                raise ScenarioError(f"invalid vehicle: {e}", section.line, 1) from None

        elif section.kind == "event":
            _check_keys(section, _EVENT_KEYS, _EVENT_KEYS)
            t_fire = _float(*section.values["t"])
            if t_fire < 0:
                raise ScenarioError("event time must be >= 0", *section.values["t"][1:])
            action = _action(*section.values["action"])
            agent = section.values["agent"][0]
            events.append(
                (t_fire, len(events), ScriptEvent(t_fire=t_fire, agent=agent, action=action))
            )
            # agent references are resolved once every vehicle is known

        else:
            raise ScenarioError(f"unknown section [{section.kind}]", section.line, 1)

    if scenario_id is None:
        raise ScenarioError("missing [scenario] section with an id")
    if not placements:
        raise ScenarioError("a scenario needs at least one [vehicle]")

    known = {vehicle.id for vehicle in placements}
    for section in sections:
        if section.kind == "event":
            agent, line, column = section.values["agent"]
            if agent not in known:
                raise UnknownAgentError(f"unknown agent {agent!r}", line, column)

    for vehicle in placements:
        if not road.is_drivable(vehicle.lane_id):
            message = f"vehicle {vehicle.id!r} starts on non-drivable lane {vehicle.lane_id}"
            logger.warning("scenario_lane_not_drivable", vehicle=vehicle.id, lane=vehicle.lane_id)
            if warnings is not None:
                warnings.append(message)

    script = [event for _, _, event in sorted(events, key=lambda item: (item[0], item[1]))]
    return Scenario(
        id=scenario_id,
        road=road,
        placements=placements,
        script=script,
        horizon=horizon,
        functions=functions,
    )


def _number(value: float) -> str:
    return repr(float(value))


def serialize_scenario(scenario: Scenario) -> str:
    """Canonical text form; load_scenario(serialize_scenario(s)) == s."""
    lanes = scenario.road.drivable_lanes
    lines = [
        "[scenario]",
        f"id = {scenario.id}",
        f"horizon = {_number(scenario.horizon)}",
        f"functions = {', '.join(function.value for function in scenario.functions)}".rstrip(),
        "",
        "[road]",
        f"drivable_lanes = {lanes[0]}..{lanes[-1]}",
        f"lane_width = {_number(scenario.road.lane_width)}",
        f"length = {_number(scenario.road.length)}",
    ]
    for vehicle in scenario.placements:
        lines += [
            "",
            f"[vehicle {vehicle.id}]",
            f"s = {_number(vehicle.s)}",
            f"lane = {vehicle.lane_id}",
            f"speed = {_number(vehicle.speed)}",
            f"accel = {_number(vehicle.script_accel)}",
            f"heading = {vehicle.heading}",
            f"lat_offset = {_number(vehicle.lat_offset)}",
            f"length = {_number(vehicle.length)}",
            f"width = {_number(vehicle.width)}",
        ]
    for index, event in enumerate(scenario.script, start=1):
        lines += [
            "",
            f"[event {index}]",
            f"t = {_number(event.t_fire)}",
            f"agent = {event.agent}",
            f"action = {event.action.describe()}",
        ]
    return "\n".join(lines) + "\n"


def load_scenario_file(path: Path, warnings: Optional[List[str]] = None) -> Scenario:
    """Read and parse a scenario file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e}") from e
    return load_scenario(text, warnings)


def shipped_scenario_path(tc_id: TestCaseId) -> Path:
    """Path of the shipped fixture file for a test case."""
    return SCENARIO_DIR / f"{TestCaseId(tc_id).value.lower()}.scn"
