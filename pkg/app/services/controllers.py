"""
Controller handles driven by the closed loop.

A handle is anything that can complete the handshake and answer one
observation line with one reply line. Sandboxed candidates are handles; so
is ScriptedController, which wraps an in-process policy and still goes
through the wire codec.
"""
import traceback
from typing import Callable, Optional, Protocol

from app.core.errors import CandidateCrashError
from app.models.protocol import ControlRequest, Observation
from app.models.sim import RoadSpec
from app.services.protocol import decode_observation, encode_control
from app.services.simulation import DT

Policy = Callable[[Observation], ControlRequest]


class ControllerHandle(Protocol):
    """What run_closed_loop needs from a controller."""

    async def handshake(self, road: RoadSpec) -> None: ...

    async def exchange(self, message: bytes) -> bytes: ...

    @property
    def stderr_tail(self) -> str: ...


class ScriptedController:
    """In-process controller around a policy function."""

    def __init__(self, policy: Policy, name: str = "scripted") -> None:
        self.name = name
        self._policy = policy
        self._road: Optional[RoadSpec] = None
        self._stderr = ""

    async def handshake(self, road: RoadSpec) -> None:
        self._road = road

    async def exchange(self, message: bytes) -> bytes:
        """Decode the observation, run the policy, encode the reply."""
        observation = decode_observation(message)
        try:
            request = self._policy(observation)
        except Exception as e:
            self._stderr = traceback.format_exc()
            raise CandidateCrashError(1, self._stderr) from e
        return encode_control(request)

    @property
    def stderr_tail(self) -> str:
        return self._stderr


def tick_of(observation: Observation) -> int:
    """Tick index of an observation."""
    return round(observation.t / DT)


def idle_policy(observation: Observation) -> ControlRequest:
    """Never touches a channel."""
    return ControlRequest()


def brake_from(onset: int) -> Policy:
    """Full braking from a tick on."""

    def policy(observation: Observation) -> ControlRequest:
        return ControlRequest(brake=tick_of(observation) >= onset)

    return policy


def target_speed_from(onset: int, target: float) -> Policy:
    """Hold a target speed from a tick on."""

    def policy(observation: Observation) -> ControlRequest:
        if tick_of(observation) >= onset:
            return ControlRequest(target_speed=target)
        return ControlRequest()

    return policy


def switch_at(*ticks: int, direction: int = 1) -> Policy:
    """One lane-change request at each of the given ticks."""
    wanted = set(ticks)

    def policy(observation: Observation) -> ControlRequest:
        if tick_of(observation) in wanted:
            return ControlRequest(switch_lane=direction)
        return ControlRequest()

    return policy
