"""
Wire codec for the harness/controller tick protocol.

Messages are UTF-8 JSON objects, one per line. Observations are written with
a canonical key order and six decimals so that the bytes sent to a candidate
depend only on the world state.
"""
import json
import math
from typing import Any, Dict, FrozenSet, Optional, Protocol

import structlog

from app.config import settings
from app.core.errors import CandidateCrashError, CandidateTimeoutError, ProtocolError
from app.models.protocol import (
    AgentObservation,
    Channel,
    ChannelMask,
    ControlRequest,
    DecodedControl,
    EgoObservation,
    Observation,
    RoadObservation,
)
from app.models.sim import RoadSpec, WorldState

logger = structlog.get_logger()

READY_LINE = b"ready"
FLOAT_DIGITS = 6
REPLY_KEYS = frozenset({"brake", "target_speed", "switch_lane"})


class LineChannel(Protocol):
    """Line transport offered by a running candidate."""

    async def send_line(self, payload: bytes) -> None: ...

    async def receive_line(self, timeout: float) -> bytes: ...


def _fixed(value: float) -> float:
    """The float a six-decimal rendering decodes back to."""
    return float(f"{value:.{FLOAT_DIGITS}f}") + 0.0


def _dump(value: Any) -> str:
    """Canonical JSON: keys in insertion order, floats with fixed precision."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{_fixed(value):.{FLOAT_DIGITS}f}"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_dump(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_dump(item) for item in value) + "]"
    if value is None:
        return "null"
    raise TypeError(f"cannot encode {type(value).__name__}")


def build_observation(world: WorldState, ego_id: str) -> Observation:
    """
    Observation a controller receives for a world, at wire precision.

    Raises:
        KeyError: If ego_id is not in the world
    """
    ego = world.vehicle(ego_id)
    others = [
        AgentObservation(
            id=vehicle.id,
            s=_fixed(vehicle.s),
            lane_id=vehicle.lane_id,
            lat_offset=_fixed(vehicle.lat_offset),
            speed=_fixed(vehicle.speed),
            heading=vehicle.heading,
        )
        for vehicle in world.vehicles
        if vehicle.id != ego_id
    ]
    return Observation(
        t=_fixed(world.t),
        ego=EgoObservation(
            s=_fixed(ego.s),
            lane_id=ego.lane_id,
            lat_offset=_fixed(ego.lat_offset),
            speed=_fixed(ego.speed),
        ),
        others=others,
        road=RoadObservation(
            drivable_lanes=list(world.road.drivable_lanes),
            lane_width=_fixed(world.road.lane_width),
        ),
    )


def encode_observation(world: WorldState, ego_id: str) -> bytes:
    """
    Encode the observation line for a world.

    Args:
        world: Current world
        ego_id: Id of the controlled vehicle

    Returns:
        bytes: One newline-terminated message
    """
    observation = build_observation(world, ego_id)
    return (_dump(observation.model_dump(mode="python")) + "\n").encode("utf-8")


def decode_observation(message: bytes) -> Observation:
    """Candidate-side decoder, used by in-process controllers."""
    try:
        return Observation.model_validate_json(message)
    except ValueError as e:
        raise ProtocolError(f"malformed observation: {e}") from e


def encode_road_message(road: RoadSpec) -> bytes:
    """Message sent once after the ready line."""
    payload = {
        "type": "road",
        "drivable_lanes": list(road.drivable_lanes),
        "lane_width": road.lane_width,
        "length": road.length,
    }
    return (_dump(payload) + "\n").encode("utf-8")


def encode_control(request: ControlRequest) -> bytes:
    """Candidate-side encoder; only non-default channels are written."""
    payload: Dict[str, Any] = {}
    if request.brake:
        payload["brake"] = True
    if request.target_speed is not None:
        payload["target_speed"] = request.target_speed
    if request.switch_lane != 0:
        payload["switch_lane"] = request.switch_lane
    return (json.dumps(payload, separators=(",", ":")) + "\n").encode("utf-8")


def _reject_constant(token: str) -> float:
    raise ValueError(f"non-finite number {token}")


def decode_control(message: bytes, mask: Optional[ChannelMask] = None) -> DecodedControl:
    """
    Decode a controller reply.

    ``touched`` lists every channel carrying a non-default value, whatever the
    mask says. The mask only fills ``off_mask`` for logging.

    Args:
        message: One reply line
        mask: Channels the function may touch

    Returns:
        DecodedControl: Request, touched channels and touched channels outside the mask

    Raises:
        ProtocolError: If the reply is malformed or a field is out of range
    """
    try:
        text = message.decode("utf-8").strip()
        payload = json.loads(text, parse_constant=_reject_constant)
    except (UnicodeDecodeError, ValueError) as e:
        raise ProtocolError(f"malformed reply: {e}") from e

    if not isinstance(payload, dict):
        raise ProtocolError("reply must be a JSON object")
    unknown = set(payload) - REPLY_KEYS
    if unknown:
        raise ProtocolError(f"unknown reply keys: {', '.join(sorted(unknown))}")

    brake = payload.get("brake", False)
    if not isinstance(brake, bool):
        raise ProtocolError("brake must be a boolean")

    target_speed = payload.get("target_speed")
    if target_speed is not None:
        if isinstance(target_speed, bool) or not isinstance(target_speed, (int, float)):
            raise ProtocolError("target_speed must be a number")
        try:
            target_speed = float(target_speed)
        except (OverflowError, ValueError) as e:
            raise ProtocolError("target_speed must be finite") from e
        if not math.isfinite(target_speed):
            raise ProtocolError("target_speed must be finite")

    switch_lane = payload.get("switch_lane", 0)
    if isinstance(switch_lane, bool) or not isinstance(switch_lane, int):
        raise ProtocolError("switch_lane must be an integer")
    if switch_lane not in (-1, 0, 1):
        raise ProtocolError("switch_lane out of range")

    request = ControlRequest(brake=brake, target_speed=target_speed, switch_lane=switch_lane)
    touched = request.touched
    off_mask: FrozenSet[Channel] = frozenset()
    if mask is not None:
        off_mask = touched - mask.allowed
    return DecodedControl(request=request, touched=touched, off_mask=off_mask)


async def handshake(
    channel: LineChannel, road: RoadSpec, timeout: Optional[float] = None
) -> None:
    """
    Wait for the candidate's ready line, then send the road description.

    Args:
        channel: Running candidate
        road: Road of the upcoming episode
        timeout: Seconds to wait for ``ready`` (HANDSHAKE_TIMEOUT_S by default)

    Raises:
        ProtocolError: On timeout or anything other than ``ready``
    """
    timeout = settings.HANDSHAKE_TIMEOUT_S if timeout is None else timeout
    try:
        line = await channel.receive_line(timeout)
    except CandidateTimeoutError as e:
        raise ProtocolError(f"no ready line within {timeout:g} s") from e
    except CandidateCrashError as e:
        raise ProtocolError(f"candidate exited before ready (status {e.returncode})") from e
    if line.strip() != READY_LINE:
        excerpt = line[:80].decode("utf-8", errors="replace").strip()
        raise ProtocolError(f"expected ready line, got {excerpt!r}")
    await channel.send_line(encode_road_message(road))
    logger.debug("handshake_complete")
