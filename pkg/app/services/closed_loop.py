"""
Closed-loop episodes: scenario script, controller exchange and physics, tick by tick.
"""
import math
from typing import Callable, List, Optional

import structlog

from app.core.errors import (
    CandidateCrashError,
    CandidateTimeoutError,
    ProtocolError,
    ValidationError,
)
from app.models.protocol import ChannelMask, ControlRequest, DecodedControl
from app.models.scenario import Scenario
from app.models.sim import Snapshot, Terminal, TerminalKind, Trace, WorldState
from app.services.controllers import ControllerHandle
from app.services.protocol import decode_control, encode_observation
from app.services.scenario_engine import (
    ScriptCursor,
    apply_overrides,
    cutin_tick,
    initial_world,
)
from app.services.simulation import A_BRAKE, DT, detect_collision, step_world

logger = structlog.get_logger()

WorldPolicy = Callable[[WorldState], ControlRequest]


class EpisodeRecorder:
    """Owns the world of one episode and records its trace."""

    def __init__(
        self, scenario: Scenario, dt: float = DT, horizon: Optional[float] = None
    ) -> None:
        self.scenario = scenario
        self.dt = dt
        self.horizon = scenario.horizon if horizon is None else horizon
        self.ego_id = scenario.ego.id
        self.total_ticks = int(math.floor(self.horizon / dt + 1e-9))
        self.world = initial_world(scenario)
        self.snapshots: List[Snapshot] = []
        self.terminal: Optional[Terminal] = None
        self._cursor = ScriptCursor(scenario)
        self._pending: List[str] = []

    @property
    def running(self) -> bool:
        return self.terminal is None and self.world.tick < self.total_ticks

    def _take_pending(self) -> List[str]:
        events, self._pending = self._pending, []
        return events

    def observe(self) -> WorldState:
        """Fire due script events and return the world the controller sees."""
        overrides = self._cursor.advance_script(self.world.t, self.world)
        for agent, actions in overrides.items():
            self._pending.extend(f"script:{agent}:{action.describe()}" for action in actions)
        self.world = apply_overrides(self.world, overrides)
        return self.world

    def record(self, decoded: DecodedControl) -> None:
        """Record the reply for the current world and step the physics."""
        following = step_world(self.world, decoded.request, self.dt)
        pairs = detect_collision(following)
        self._pending.extend(f"collision:{a}:{b}" for a, b in pairs)
        self.snapshots.append(
            Snapshot(
                tick=self.world.tick,
                world=self.world,
                request=decoded.request,
                touched=sorted(decoded.touched, key=lambda channel: channel.value),
                events=self._take_pending(),
            )
        )
        self.world = following
        ego_pairs = [pair for pair in pairs if self.ego_id in pair]
        if ego_pairs:
            others = sorted({b if a == self.ego_id else a for a, b in ego_pairs})
            self.terminal = Terminal(
                kind=TerminalKind.COLLISION,
                tick=following.tick,
                detail=f"ego collided with {', '.join(others)}",
            )

    def abort(self, kind: TerminalKind, detail: str) -> None:
        """End the episode because of the controller."""
        self.snapshots.append(
            Snapshot(tick=self.world.tick, world=self.world, events=self._take_pending())
        )
        self.terminal = Terminal(kind=kind, tick=self.world.tick, detail=detail)

    def finish(self, stderr_tail: str = "") -> Trace:
        terminal = self.terminal or Terminal(kind=TerminalKind.COMPLETED, tick=self.world.tick)
        return Trace(
            scenario_id=self.scenario.id,
            ego_id=self.ego_id,
            dt=self.dt,
            horizon=self.horizon,
            snapshots=self.snapshots,
            terminal=terminal,
            final_world=self.world,
            stderr_tail=stderr_tail,
        )


def _last_line(text: str) -> str:
    lines = [line for line in text.strip().splitlines() if line.strip()]
    return lines[-1].strip() if lines else ""


async def run_closed_loop(
    scenario: Scenario,
    controller: ControllerHandle,
    mask: Optional[ChannelMask] = None,
    dt: float = DT,
    horizon: Optional[float] = None,
) -> Trace:
    """
    Run one episode against a controller whose handshake is complete.

    Each tick: encode observation, exchange, decode, step the world, detect
    collisions. The episode stops at the horizon, at an ego collision, or when
    the controller crashes, hangs or breaks the protocol.

    Args:
        scenario: Scenario to run
        controller: Controller handle
        mask: Channel mask of the function under test (bookkeeping only)
        dt: Step length (s)
        horizon: Override of the scenario horizon (s)

    Returns:
        Trace: Full episode record; candidate faults end up in Trace.terminal
    """
    recorder = EpisodeRecorder(scenario, dt, horizon)
    while recorder.running:
        world = recorder.observe()
        try:
            reply = await controller.exchange(encode_observation(world, recorder.ego_id))
            decoded = decode_control(reply, mask)
        except CandidateTimeoutError as e:
            recorder.abort(TerminalKind.PROTOCOL_TIMEOUT, e.message)
            break
        except CandidateCrashError as e:
            recorder.abort(TerminalKind.RUNTIME_ERROR, _last_line(e.stderr_tail) or e.message)
            break
        except ProtocolError as e:
            recorder.abort(TerminalKind.PROTOCOL_ERROR, e.detail)
            break
        if decoded.off_mask:
            logger.debug(
                "off_mask_channel",
                scenario=scenario.id,
                tick=world.tick,
                channels=sorted(channel.value for channel in decoded.off_mask),
            )
        recorder.record(decoded)

    trace = recorder.finish(controller.stderr_tail)
    logger.info(
        "episode_complete",
        scenario=scenario.id,
        terminal=trace.terminal.kind.value,
        ticks=len(trace.snapshots),
    )
    return trace


def roll_out(
    scenario: Scenario, policy: WorldPolicy, horizon: Optional[float] = None
) -> Trace:
    """
    Run an episode with a policy over the true world state, without the wire.

    Used for calibration and latest-safe-action sweeps.
    """
    recorder = EpisodeRecorder(scenario, DT, horizon)
    while recorder.running:
        world = recorder.observe()
        request = policy(world)
        recorder.record(DecodedControl(request=request, touched=request.touched))
    return recorder.finish()


def handshake_failed_trace(scenario: Scenario, detail: str, stderr_tail: str = "") -> Trace:
    """Trace of an episode whose controller never completed the handshake."""
    return Trace(
        scenario_id=scenario.id,
        ego_id=scenario.ego.id,
        dt=DT,
        horizon=scenario.horizon,
        terminal=Terminal(kind=TerminalKind.HANDSHAKE_FAILED, tick=0, detail=detail),
        final_world=initial_world(scenario),
        stderr_tail=stderr_tail,
    )


def measure_time_to_brake(scenario: Scenario, max_onset_ticks: int = 40) -> Optional[float]:
    """
    Latest brake onset after cut-in completion that still avoids a collision.

    Args:
        scenario: A cut-in scenario
        max_onset_ticks: Onsets to try after cut-in completion

    Returns:
        Optional[float]: Time-to-brake in seconds, None if even immediate braking collides

    Raises:
        ValidationError: If the scenario has no scripted cut-in
    """
    completion = cutin_tick(scenario)
    if completion is None:
        raise ValidationError(f"scenario {scenario.id} has no scripted cut-in")
    horizon = min(scenario.horizon, completion * DT + scenario.ego.speed / A_BRAKE + 4.0)

    latest: Optional[int] = None
    for delay in range(max_onset_ticks + 1):
        onset = completion + delay
        trace = roll_out(
            scenario, lambda world, onset=onset: ControlRequest(brake=world.tick >= onset), horizon
        )
        if trace.terminal.kind == TerminalKind.COLLISION:
            break
        latest = delay
    if latest is None:
        return None
    return round(latest * DT, 9)
