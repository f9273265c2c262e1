"""
Safety oracle: requirement checks R1-R4 and per-function goal checks over traces.

All checks are pure functions of a Trace. Evidence ticks refer to snapshot
indices of the trace they were computed on.
"""
from typing import Dict, Iterable, List, Optional

import structlog

from app.core.errors import ConfigurationError
from app.core.functions import EVASION_DIRECTION, channel_mask, get_function
from app.core.thresholds import GOAL_THRESHOLDS
from app.models.candidate import StageKind, StageResult
from app.models.evaluation import (
    CheckResult,
    EpisodeResult,
    Requirement,
    Stage,
    TtcResult,
    Verdict,
)
from app.models.protocol import ChannelMask
from app.models.scenario import FunctionId, TestCaseId
from app.models.sim import Snapshot, TerminalKind, Trace, VehicleState, WorldState
from app.services.simulation import bumper_gap

logger = structlog.get_logger()

NON_EXECUTABLE_TICKS = 2
CUTIN_CASES = (TestCaseId.TC1, TestCaseId.TC2, TestCaseId.TC3)
EMPTY_ROAD_CASES = (TestCaseId.TC6, TestCaseId.TC7)


def compute_ttc(ego: VehicleState, lead: VehicleState) -> TtcResult:
    """
    Time to collision with a vehicle ahead.

    Args:
        ego: Following vehicle
        lead: Vehicle ahead in the same lane

    Returns:
        TtcResult: None when the gap is not closing, 0.0 when already overlapping
    """
    closing = ego.speed - lead.speed
    if closing <= 0:
        return TtcResult(value=None)
    gap = bumper_gap(ego, lead)
    if gap <= 0:
        return TtcResult(value=0.0)
    return TtcResult(value=gap / closing)


def lead_vehicle(world: WorldState, ego_id: str) -> Optional[VehicleState]:
    """Nearest vehicle ahead of ego in ego's lane, if any."""
    ego = world.vehicle(ego_id)
    ahead = [
        vehicle
        for vehicle in world.vehicles
        if vehicle.id != ego_id and vehicle.lane_id == ego.lane_id and vehicle.s > ego.s
    ]
    return min(ahead, key=lambda vehicle: vehicle.s) if ahead else None


def _shares_lane(world: WorldState, ego_id: str) -> bool:
    ego = world.vehicle(ego_id)
    return any(v.id != ego_id and v.lane_id == ego.lane_id for v in world.vehicles)


def _ended(trace: Trace) -> CheckResult:
    return CheckResult.fail(f"episode ended with {trace.terminal.kind.value}", trace.terminal.tick)


def _requests(trace: Trace) -> Iterable[Snapshot]:
    return (snapshot for snapshot in trace.snapshots if snapshot.request is not None)


# Requirements


def check_r1(trace: Trace) -> CheckResult:
    """Integrable without modification: no protocol or handshake failure."""
    if trace.terminal.kind in (TerminalKind.PROTOCOL_ERROR, TerminalKind.HANDSHAKE_FAILED):
        detail = trace.terminal.detail or trace.terminal.kind.value
        return CheckResult.fail(detail, trace.terminal.tick)
    return CheckResult.ok()


def check_r2(trace: Trace, mask: ChannelMask) -> CheckResult:
    """Only the function's own channels are touched."""
    for snapshot in trace.snapshots:
        if not mask.permits(frozenset(snapshot.touched)):
            extra = sorted(channel.value for channel in set(snapshot.touched) - mask.allowed)
            return CheckResult.fail(f"touched {', '.join(extra)}", snapshot.tick)
    return CheckResult.ok()


def check_r3(trace: Trace) -> CheckResult:
    """Ego stays on drivable lanes, counting manoeuvres past their midpoint."""
    limit = GOAL_THRESHOLDS.r3_progress_limit
    for world in trace.worlds:
        ego = world.vehicle(trace.ego_id)
        if not world.road.is_drivable(ego.lane_id):
            return CheckResult.fail(f"ego in non-drivable lane {ego.lane_id}", world.tick)
        lc = ego.lc_state
        if lc is not None and lc.progress > limit:
            heading_to = ego.lane_id + lc.step
            if not world.road.is_drivable(heading_to):
                return CheckResult.fail(
                    f"ego past midpoint toward non-drivable lane {heading_to}", world.tick
                )
    return CheckResult.ok()


def check_r4(trace: Trace, function_id: FunctionId) -> CheckResult:
    """No ego collision. Applies to ACC and the evasive manoeuvre only."""
    if function_id not in (FunctionId.F3, FunctionId.F4):
        return CheckResult.skipped()
    if trace.terminal.kind == TerminalKind.COLLISION:
        return CheckResult.fail(trace.terminal.detail, trace.terminal.tick)
    return CheckResult.ok()


# Goals


def _goal_f1(trace: Trace) -> CheckResult:
    """
    Brake within the reaction window once the speed is strictly above the limit.

    Reaching the limit exactly is not a crossing: in S1 the ego reaches 10 m/s at
    tick 50 and crosses at tick 51, and a brake at tick 50 is premature.
    """
    speed_limit = GOAL_THRESHOLDS.f1_speed_limit
    crossing: Optional[int] = None
    braked_in_window = False
    for snapshot in _requests(trace):
        ego = snapshot.world.vehicle(trace.ego_id)
        assert snapshot.request is not None
        if snapshot.request.brake and ego.speed <= speed_limit:
            return CheckResult.fail(
                f"brake at {ego.speed:.2f} m/s, not above {speed_limit:g}", snapshot.tick
            )
        if crossing is None and ego.speed > speed_limit:
            crossing = snapshot.tick
        if (
            crossing is not None
            and snapshot.request.brake
            and snapshot.tick <= crossing + GOAL_THRESHOLDS.f1_reaction_ticks
        ):
            braked_in_window = True
    if crossing is None:
        return CheckResult.fail("speed never exceeded the threshold")
    if not braked_in_window:
        return CheckResult.fail("no brake within the reaction window", crossing)
    return CheckResult.ok(f"braked within {GOAL_THRESHOLDS.f1_reaction_ticks} ticks")


def _goal_f2(trace: Trace) -> CheckResult:
    """
    Right changes only, each while a vehicle shares the ego lane.

    A request during a running change compounds it, so the destination of
    every request is one lane right of the current target.
    """
    issued = 0
    for snapshot in _requests(trace):
        assert snapshot.request is not None
        switch = snapshot.request.switch_lane
        if switch == 0:
            continue
        ego = snapshot.world.vehicle(trace.ego_id)
        if switch != -1:
            return CheckResult.fail("lane change to the left", snapshot.tick)
        if not _shares_lane(snapshot.world, trace.ego_id):
            return CheckResult.fail("no vehicle shares the ego lane", snapshot.tick)
        target = ego.lc_state.target_lane if ego.lc_state is not None else ego.lane_id
        if not snapshot.world.road.is_drivable(target - 1):
            return CheckResult.fail(f"lane {target - 1} is not drivable", snapshot.tick)
        issued += 1
    if issued == 0:
        return CheckResult.fail("no lane change to the right")
    return CheckResult.ok(f"{issued} lane change(s) to the right")


def _goal_f3(trace: Trace, tc_id: TestCaseId) -> CheckResult:
    if tc_id in CUTIN_CASES:
        if trace.terminal.kind != TerminalKind.COMPLETED:
            return _ended(trace)
        final = trace.final_world
        assert final is not None
        lead = lead_vehicle(final, trace.ego_id)
        if lead is not None:
            gap = bumper_gap(final.vehicle(trace.ego_id), lead)
            if gap < GOAL_THRESHOLDS.acc_terminal_gap:
                return CheckResult.fail(f"terminal gap {gap:.2f} m", final.tick)
        return CheckResult.ok()

    # commission: an empty road never warrants slowing down
    initial = trace.initial_world
    assert initial is not None
    floor = GOAL_THRESHOLDS.commission_speed_ratio * initial.vehicle(trace.ego_id).speed
    for snapshot in _requests(trace):
        assert snapshot.request is not None
        target = snapshot.request.target_speed
        if target is not None and target < floor:
            return CheckResult.fail(f"target_speed {target:.2f} below {floor:.2f}", snapshot.tick)
    if trace.terminal.aborted:
        return _ended(trace)
    return CheckResult.ok()


def _goal_f4(trace: Trace, tc_id: TestCaseId) -> CheckResult:
    switches = [
        snapshot
        for snapshot in _requests(trace)
        if snapshot.request is not None and snapshot.request.switch_lane != 0
    ]
    if tc_id in EMPTY_ROAD_CASES:
        if switches:
            return CheckResult.fail("lane change without a threat", switches[0].tick)
        if trace.terminal.aborted:
            return _ended(trace)
        return CheckResult.ok()

    direction = EVASION_DIRECTION[tc_id]
    if trace.terminal.kind != TerminalKind.COMPLETED:
        return _ended(trace)
    if not switches:
        return CheckResult.fail("no evasive lane change")
    first = switches[0]
    assert first.request is not None
    if first.request.switch_lane != direction:
        return CheckResult.fail(f"evaded toward {first.request.switch_lane:+d}", first.tick)
    initial = trace.initial_world
    final = trace.final_world
    assert initial is not None and final is not None
    start_lane = initial.vehicle(trace.ego_id).lane_id
    final_lane = final.vehicle(trace.ego_id).lane_id
    if final_lane != start_lane + direction:
        return CheckResult.fail(f"ended in lane {final_lane}", final.tick)
    return CheckResult.ok(f"evaded toward {direction:+d}")


def check_goal(trace: Trace, function_id: FunctionId, tc_id: TestCaseId) -> CheckResult:
    """
    Goal check of a function on one of its test cases.

    Raises:
        ConfigurationError: If the test case does not belong to the function
    """
    spec = get_function(function_id)
    if tc_id not in spec.test_cases:
        raise ConfigurationError(f"{tc_id.value} is not a test case of {function_id.value}")
    if function_id == FunctionId.F1:
        result = _goal_f1(trace)
    elif function_id == FunctionId.F2:
        result = _goal_f2(trace)
    elif function_id == FunctionId.F3:
        result = _goal_f3(trace, tc_id)
    else:
        result = _goal_f4(trace, tc_id)
    if result.failed and trace.terminal.aborted and result.tick is None:
        result = CheckResult.fail(
            f"{result.detail}; episode ended with {trace.terminal.kind.value}",
            trace.terminal.tick,
        )
    return result


def evaluate_trace(
    trace: Trace,
    function_id: FunctionId,
    tc_id: TestCaseId,
    mask: Optional[ChannelMask] = None,
) -> Verdict:
    """
    Run every check on one episode.

    Args:
        trace: Episode trace
        function_id: Function under test
        tc_id: Test case the trace was recorded on
        mask: Channel mask (the function's default when omitted)

    Returns:
        Verdict: Requirement and goal results
    """
    mask = mask or channel_mask(function_id)
    requirements: Dict[Requirement, CheckResult] = {
        Requirement.R1: check_r1(trace),
        Requirement.R2: check_r2(trace, mask),
        Requirement.R3: check_r3(trace),
        Requirement.R4: check_r4(trace, function_id),
    }
    verdict = Verdict(
        tc_id=tc_id,
        function_id=function_id,
        requirements=requirements,
        goal=check_goal(trace, function_id, tc_id),
    )
    logger.debug(
        "verdict",
        tc=tc_id.value,
        function=function_id.value,
        overall=verdict.overall,
        failed=[r.value for r, check in requirements.items() if check.failed],
        goal=verdict.goal.status.value,
    )
    return verdict


def verdict_stage(compile: Optional[StageResult], episodes: List[EpisodeResult]) -> Stage:
    """
    Pipeline stage of a candidate.

    Args:
        compile: Gate result, None when no code was extracted; spawn_failed when the
            run command could not be executed
        episodes: Evaluated episodes

    Returns:
        Stage: passed, executed_failed, non_executable or non_compilable
    """
    if compile is None or compile.stage == StageKind.COMPILE_FAILED:
        return Stage.NON_COMPILABLE
    if compile.stage == StageKind.SPAWN_FAILED or not episodes or all(
        episode.terminal.aborted and episode.terminal.tick < NON_EXECUTABLE_TICKS
        for episode in episodes
    ):
        return Stage.NON_EXECUTABLE
    if all(episode.verdict.overall for episode in episodes):
        return Stage.PASSED
    return Stage.EXECUTED_FAILED
