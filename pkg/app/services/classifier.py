"""
Failure-mode classifier.

Rules run in a fixed order: extraction, compile diagnostics, static source
scans, runtime stderr patterns, then trace signatures. Each attached mode
carries the evidence that triggered it.
"""
import ast
import re
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Set

import structlog

from app.core.functions import EVASION_DIRECTION, channel_mask, get_function
from app.models.candidate import StageKind
from app.models.evaluation import (
    EvaluationOutcome,
    FailureEvidence,
    FailureMode,
    Requirement,
    Stage,
    Verdict,
)
from app.models.protocol import Channel, ControlRequest
from app.models.scenario import FunctionId, TestCaseId
from app.models.sim import TerminalKind, Trace, WorldState
from app.services.closed_loop import roll_out
from app.services.scenario_engine import instantiate_tc
from app.services.simulation import DT

logger = structlog.get_logger()

SWEEP_MARGIN_TICKS = 60

EXTRANEOUS_NAME_RE = re.compile(
    r"^(?:Ego)?(?:Vehicle|Car|Scenario|World|Road|Simulation|Simulator|Traffic)\w*$"
    r"|^simulate\w*$",
    re.IGNORECASE,
)
TEST_CASE_CONSTANTS = {33.33, 22.22, 11.11}

FIELD_VOCABULARY: Dict[str, Set[str]] = {
    "ego": {"s", "lane_id", "lat_offset", "speed"},
    "agent": {"id", "s", "lane_id", "lat_offset", "speed", "heading"},
    "road": {"drivable_lanes", "lane_width"},
}
DICT_METHODS = {"get", "keys", "items", "values", "copy", "setdefault", "update", "pop"}

RUNTIME_PATTERNS = [
    (re.compile(r"\bZeroDivisionError\b"), FailureMode.DIVISION_BY_ZERO),
    (re.compile(r"\b(?:KeyError|AttributeError)\b"), FailureMode.BAD_INTERFACE_ACCESS),
]


# Static scans


def _string_key(node: ast.AST) -> Optional[str]:
    if isinstance(node, ast.Constant) and isinstance(node.value, str):
        return node.value
    return None


class _InterfaceScanner(ast.NodeVisitor):
    """Tracks names bound to observation parts and checks the fields read from them."""

    def __init__(self) -> None:
        self.kinds: Dict[str, str] = {}
        self.findings: List[FailureEvidence] = []

    def kind_of(self, node: ast.AST) -> Optional[str]:
        """Which observation part an expression denotes, if any."""
        if isinstance(node, ast.Name):
            return self.kinds.get(node.id)
        key: Optional[str] = None
        base: Optional[ast.AST] = None
        if isinstance(node, ast.Subscript):
            key, base = _string_key(node.slice), node.value
            if key is None and self.kind_of(node.value) == "others":
                return "agent"
        elif (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Attribute)
            and node.func.attr == "get"
            and node.args
        ):
            key, base = _string_key(node.args[0]), node.func.value
        if key in ("ego", "road", "others") and base is not None and self.kind_of(base) is None:
            return key
        return None

    def _report(self, kind: str, field: str, node: ast.AST) -> None:
        if kind in FIELD_VOCABULARY and field not in FIELD_VOCABULARY[kind]:
            self.findings.append(
                FailureEvidence(
                    mode=FailureMode.BAD_INTERFACE_ACCESS,
                    detail=f"{kind} has no field {field!r}",
                    location=f"{getattr(node, 'lineno', 0)}:{getattr(node, 'col_offset', 0) + 1}",
                )
            )

    def _bind(self, target: ast.AST, kind: Optional[str]) -> None:
        if isinstance(target, ast.Name):
            if kind is None:
                self.kinds.pop(target.id, None)
            else:
                self.kinds[target.id] = kind

    def visit_Assign(self, node: ast.Assign) -> None:
        self.generic_visit(node)
        kind = self.kind_of(node.value)
        for target in node.targets:
            self._bind(target, kind)

    def visit_For(self, node: ast.For) -> None:
        self.visit(node.iter)
        if self.kind_of(node.iter) == "others":
            self._bind(node.target, "agent")
        for statement in [*node.body, *node.orelse]:
            self.visit(statement)

    def visit_comprehension(self, node: ast.comprehension) -> None:
        self.visit(node.iter)
        if self.kind_of(node.iter) == "others":
            self._bind(node.target, "agent")
        for condition in node.ifs:
            self.visit(condition)

    def visit_ListComp(self, node: ast.ListComp) -> None:
        for generator in node.generators:
            self.visit_comprehension(generator)
        self.visit(node.elt)

    def visit_GeneratorExp(self, node: ast.GeneratorExp) -> None:
        for generator in node.generators:
            self.visit_comprehension(generator)
        self.visit(node.elt)

    def visit_Subscript(self, node: ast.Subscript) -> None:
        self.generic_visit(node)
        kind = self.kind_of(node.value)
        key = _string_key(node.slice)
        if kind is not None and key is not None:
            self._report(kind, key, node)

    def visit_Call(self, node: ast.Call) -> None:
        self.generic_visit(node)
        func = node.func
        if isinstance(func, ast.Attribute) and func.attr == "get" and node.args:
            kind = self.kind_of(func.value)
            key = _string_key(node.args[0])
            if kind is not None and key is not None:
                self._report(kind, key, node)

    def visit_Attribute(self, node: ast.Attribute) -> None:
        self.generic_visit(node)
        kind = self.kind_of(node.value)
        if kind is not None and node.attr not in DICT_METHODS:
            self._report(kind, node.attr, node)


def scan_interface_access(tree: ast.AST) -> List[FailureEvidence]:
    """Fields read from the observation that the protocol does not define."""
    scanner = _InterfaceScanner()
    scanner.visit(tree)
    return scanner.findings


def scan_extraneous_code(tree: ast.AST) -> List[FailureEvidence]:
    """Simulator-like classes or functions and embedded test-case constants."""
    findings = []
    for node in ast.walk(tree):
        if isinstance(node, (ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
            if EXTRANEOUS_NAME_RE.match(node.name):
                findings.append(
                    FailureEvidence(
                        mode=FailureMode.EXTRANEOUS_CODE,
                        detail=f"defines {node.name}",
                        location=f"{node.lineno}:{node.col_offset + 1}",
                    )
                )
        elif isinstance(node, ast.Constant) and isinstance(node.value, float):
            if round(node.value, 2) in TEST_CASE_CONSTANTS:
                findings.append(
                    FailureEvidence(
                        mode=FailureMode.EXTRANEOUS_CODE,
                        detail=f"embeds test-case speed {node.value!r}",
                        location=f"{node.lineno}:{node.col_offset + 1}",
                    )
                )
    return findings


# Latest safe action


def _golden_policy(
    function_id: FunctionId, tc_id: TestCaseId, onset: int
) -> Callable[[WorldState], ControlRequest]:
    direction = EVASION_DIRECTION.get(tc_id, 1)

    def policy(world: WorldState) -> ControlRequest:
        if function_id == FunctionId.F4:
            return ControlRequest(switch_lane=direction if world.tick == onset else 0)
        return ControlRequest(target_speed=0.0 if world.tick >= onset else None)

    return policy


@lru_cache(maxsize=32)
def latest_safe_action(tc_id: TestCaseId, function_id: FunctionId) -> Optional[int]:
    """
    Latest tick at which the function's reference action still avoids a collision.

    The reference action is a full stop request for ACC and one evasive lane
    change in the expected direction for the evasive manoeuvre. Onsets are
    swept backward from the tick at which doing nothing collides.

    Returns:
        Optional[int]: Latest safe onset tick, None when idling is safe or nothing helps
    """
    if function_id not in (FunctionId.F3, FunctionId.F4):
        return None
    scenario = instantiate_tc(tc_id)
    idle = roll_out(scenario, lambda world: ControlRequest())
    if idle.terminal.kind != TerminalKind.COLLISION:
        return None
    collision = idle.terminal.tick
    horizon = min(scenario.horizon, (collision + SWEEP_MARGIN_TICKS) * DT)

    for onset in range(collision - 1, -1, -1):
        trace = roll_out(scenario, _golden_policy(function_id, tc_id, onset), horizon)
        if trace.terminal.kind != TerminalKind.COLLISION:
            logger.debug(
                "latest_safe_action", tc=tc_id.value, function=function_id.value, tick=onset
            )
            return onset
    return None


# Trace signatures


def _lane_stimuli(trace: Trace, function_id: FunctionId, tc_id: TestCaseId) -> int:
    """How many lane changes the situation warrants."""
    if function_id == FunctionId.F4:
        return 1 if tc_id in EVASION_DIRECTION else 0
    if function_id != FunctionId.F2:
        return 0
    edges = 0
    active = False
    for world in trace.worlds:
        ego = world.vehicle(trace.ego_id)
        shares = any(
            v.id != trace.ego_id and v.lane_id == ego.lane_id for v in world.vehicles
        )
        condition = shares and ego.lc_state is None
        if condition and not active:
            edges += 1
        active = condition
    return edges


def _net_lane_change(trace: Trace) -> int:
    initial, final = trace.initial_world, trace.final_world
    if initial is None or final is None:
        return 0
    start = initial.vehicle(trace.ego_id).lane_id
    ego = final.vehicle(trace.ego_id)
    end = ego.lc_state.target_lane if ego.lc_state is not None else ego.lane_id
    return end - start


def _decelerating_off_mask(trace: Trace, function_id: FunctionId) -> Optional[int]:
    """First tick where a channel outside the mask was used to slow down."""
    allowed = channel_mask(function_id).allowed
    for snapshot in trace.snapshots:
        request = snapshot.request
        if request is None:
            continue
        speed = snapshot.world.vehicle(trace.ego_id).speed
        if Channel.BRAKE not in allowed and request.brake:
            return snapshot.tick
        if (
            Channel.TARGET_SPEED not in allowed
            and request.target_speed is not None
            and request.target_speed < speed
        ):
            return snapshot.tick
    return None


def _first_allowed_touch(trace: Trace, function_id: FunctionId) -> Optional[int]:
    allowed = channel_mask(function_id).allowed
    for snapshot in trace.snapshots:
        if allowed & set(snapshot.touched):
            return snapshot.tick
    return None


def _executed(trace: Trace) -> bool:
    return not (trace.terminal.aborted and trace.terminal.tick < 2)


def classify_failure(
    outcome: EvaluationOutcome,
    source: Optional[str],
    traces: Optional[Dict[TestCaseId, Trace]] = None,
) -> List[FailureEvidence]:
    """
    Attach failure modes to a failed outcome.

    Args:
        outcome: Evaluated candidate (stage, compile result, episodes)
        source: Candidate source, None when nothing was extracted
        traces: Episode traces by test case (outcome.traces by default)

    Returns:
        list: One evidence entry per mode, in rule order; empty for passed outcomes
    """
    if outcome.stage == Stage.PASSED:
        return []
    function_id = outcome.meta.function_id
    spec = get_function(function_id)
    traces = outcome.traces if traces is None else traces
    verdicts: Dict[TestCaseId, Verdict] = {e.tc_id: e.verdict for e in outcome.episodes}
    empty_road = verdicts.get(TestCaseId.TC6)
    empty_road_clean = empty_road is not None and not empty_road.goal.failed
    evidence: List[FailureEvidence] = []

    def attach(item: FailureEvidence) -> None:
        if all(existing.mode != item.mode for existing in evidence):
            evidence.append(item)

    if outcome.extraction_failure is not None or source is None:
        attach(
            FailureEvidence(
                mode=FailureMode.NO_CODE_EMITTED,
                detail=outcome.extraction_failure or "no code emitted",
            )
        )
        return evidence

    if outcome.compile is not None and outcome.compile.stage == StageKind.COMPILE_FAILED:
        lines = [line.strip() for line in outcome.compile.diagnostics.splitlines() if line.strip()]
        detail = next((line for line in reversed(lines) if "Error" in line), lines[-1])
        attach(FailureEvidence(mode=FailureMode.SYNTAX_ERROR, detail=detail))
        return evidence

    try:
        tree = ast.parse(source)
    except (SyntaxError, ValueError):
        tree = None
    if tree is not None:
        for item in scan_extraneous_code(tree) + scan_interface_access(tree):
            attach(item)

    for tc_id, trace in traces.items():
        if trace.terminal.kind != TerminalKind.RUNTIME_ERROR:
            continue
        for pattern, mode in RUNTIME_PATTERNS:
            if pattern.search(trace.stderr_tail):
                attach(
                    FailureEvidence(
                        mode=mode,
                        detail=trace.terminal.detail,
                        tc_id=tc_id,
                        tick=trace.terminal.tick,
                    )
                )

    # trace signatures
    action_traces = [traces[tc] for tc in spec.needs_action if tc in traces]
    if (
        action_traces
        and all(_executed(trace) for trace in action_traces)
        and not any(snapshot.touched for trace in action_traces for snapshot in trace.snapshots)
    ):
        attach(
            FailureEvidence(
                mode=FailureMode.NO_ACTION,
                detail="no channel touched where action was needed",
                tc_id=spec.needs_action[0],
            )
        )

    for tc_id, trace in traces.items():
        verdict = verdicts.get(tc_id)
        if verdict is None:
            continue

        if function_id != FunctionId.F2 and verdict.requirements[Requirement.R2].failed:
            tick = _decelerating_off_mask(trace, function_id)
            if tick is not None:
                attach(
                    FailureEvidence(
                        mode=FailureMode.ALTERNATIVE_STRATEGY,
                        detail=verdict.requirements[Requirement.R2].detail,
                        tc_id=tc_id,
                        tick=tick,
                    )
                )

        net = _net_lane_change(trace)
        stimuli = _lane_stimuli(trace, function_id, tc_id)
        r3 = verdict.requirements[Requirement.R3]
        if abs(net) > stimuli or r3.failed:
            attach(
                FailureEvidence(
                    mode=FailureMode.EXCESS_LANE_CHANGE,
                    detail=r3.detail if r3.failed else f"{abs(net)} lane(s) for {stimuli} stimuli",
                    tc_id=tc_id,
                    tick=r3.tick,
                )
            )

        # a commission on TC6 as well is not about target selection
        if tc_id == TestCaseId.TC7 and verdict.goal.failed and empty_road_clean:
            attach(
                FailureEvidence(
                    mode=FailureMode.WRONG_TARGET_SELECTION,
                    detail=f"reacted to oncoming traffic: {verdict.goal.detail}",
                    tc_id=tc_id,
                    tick=verdict.goal.tick,
                )
            )

        if tc_id in spec.needs_action and not verdict.overall:
            latest = latest_safe_action(tc_id, function_id)
            first = _first_allowed_touch(trace, function_id)
            if latest is not None and first is not None and first > latest:
                attach(
                    FailureEvidence(
                        mode=FailureMode.BAD_THRESHOLD,
                        detail=f"first action at tick {first}, latest safe tick {latest}",
                        tc_id=tc_id,
                        tick=first,
                    )
                )

    if evidence:
        logger.info(
            "failure_classified",
            model=outcome.meta.model,
            function=function_id.value,
            attempt=outcome.meta.attempt,
            modes=[item.mode.value for item in evidence],
        )
    return evidence
