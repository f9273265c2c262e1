"""
Pydantic models for the harness/controller tick protocol.
"""
from enum import Enum
from typing import FrozenSet, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class Channel(str, Enum):
    """Actuation channels a controller may request."""

    BRAKE = "brake"
    TARGET_SPEED = "target_speed"
    SWITCH_LANE = "switch_lane"


class ChannelMask(BaseModel):
    """Channels a function is allowed to touch."""

    model_config = ConfigDict(frozen=True)

    allowed: FrozenSet[Channel] = Field(..., description="Permitted channels")

    @field_validator("allowed")
    @classmethod
    def validate_non_empty(cls, v: FrozenSet[Channel]) -> FrozenSet[Channel]:
        """A mask must permit at least one channel."""
        if not v:
            raise ValueError("channel mask must not be empty")
        return v

    def permits(self, touched: FrozenSet[Channel]) -> bool:
        """Whether every touched channel is allowed."""
        return touched <= self.allowed


class ControlRequest(BaseModel):
    """One controller reply.

    target_speed may be negative on the wire; the R2 oracle judges it, the
    decoder does not reject it.
    """

    model_config = ConfigDict(frozen=True)

    brake: bool = False
    target_speed: Optional[float] = None
    switch_lane: Literal[-1, 0, 1] = 0

    @property
    def touched(self) -> FrozenSet[Channel]:
        """Channels carrying a non-default value."""
        channels = set()
        if self.brake:
            channels.add(Channel.BRAKE)
        if self.target_speed is not None:
            channels.add(Channel.TARGET_SPEED)
        if self.switch_lane != 0:
            channels.add(Channel.SWITCH_LANE)
        return frozenset(channels)


class DecodedControl(BaseModel):
    """A decoded reply plus channel bookkeeping."""

    model_config = ConfigDict(frozen=True)

    request: ControlRequest
    touched: FrozenSet[Channel]
    off_mask: FrozenSet[Channel] = frozenset()


class EgoObservation(BaseModel):
    """Ego kinematics as the controller sees them."""

    model_config = ConfigDict(frozen=True)

    s: float
    lane_id: int
    lat_offset: float
    speed: float


class AgentObservation(BaseModel):
    """Another agent as the controller sees it."""

    model_config = ConfigDict(frozen=True)

    id: str
    s: float
    lane_id: int
    lat_offset: float
    speed: float
    heading: Literal[-1, 1] = 1


class RoadObservation(BaseModel):
    """Road description sent with every observation and at handshake."""

    model_config = ConfigDict(frozen=True)

    drivable_lanes: List[int]
    lane_width: float


class Observation(BaseModel):
    """One observation message."""

    model_config = ConfigDict(frozen=True)

    type: Literal["observation"] = "observation"
    t: float
    ego: EgoObservation
    others: List[AgentObservation] = Field(default_factory=list)
    road: RoadObservation
