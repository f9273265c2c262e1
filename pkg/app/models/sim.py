"""
Pydantic models for the kinematic simulation: vehicles, road, world and traces.
"""
from enum import Enum
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.protocol import Channel, ControlRequest


class LaneChange(BaseModel):
    """An in-progress lane change.

    The manoeuvre is executed one lane step at a time. ``target_lane`` is the
    final target, ``step`` the direction of the current one-lane step and
    ``progress`` how far that step has come.
    """

    model_config = ConfigDict(frozen=True)

    target_lane: int
    progress: float = Field(0.0, ge=0.0, le=1.0)
    step: Literal[-1, 1]


class VehicleState(BaseModel):
    """Kinematic state of one agent."""

    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1)
    s: float = Field(..., description="Longitudinal position (m)")
    lane_id: int
    lat_offset: float = Field(0.0, description="Offset from the lane centre, positive is left")
    speed: float = Field(..., ge=0.0, description="Speed magnitude (m/s)")
    accel: float = Field(0.0, description="Acceleration applied in the last step")
    script_accel: float = Field(0.0, description="Baseline acceleration when not overridden")
    heading: Literal[-1, 1] = Field(1, description="+1 drives toward increasing s")
    lc_state: Optional[LaneChange] = None
    length: float = 5.0
    width: float = 2.0


class RoadSpec(BaseModel):
    """Straight multi-lane road. Larger lane ids are further left."""

    model_config = ConfigDict(frozen=True)

    drivable_lanes: List[int] = Field(default_factory=lambda: [-4, -3, -2])
    lane_width: float = Field(3.5, gt=0.0)
    length: float = Field(2000.0, gt=0.0)

    @field_validator("drivable_lanes")
    @classmethod
    def validate_contiguous(cls, v: List[int]) -> List[int]:
        """Drivable lanes form a contiguous integer range."""
        lanes = sorted(set(v))
        if not lanes:
            raise ValueError("drivable_lanes must not be empty")
        if lanes != list(range(lanes[0], lanes[-1] + 1)):
            raise ValueError("drivable_lanes must be a contiguous range")
        return lanes

    def lane_center(self, lane_id: int) -> float:
        """Lateral coordinate of a lane centre."""
        return (lane_id + 0.5) * self.lane_width

    def is_drivable(self, lane_id: int) -> bool:
        """Whether a lane belongs to the drivable area."""
        return lane_id in self.drivable_lanes


class WorldState(BaseModel):
    """All agents at one tick. The ego vehicle comes first."""

    model_config = ConfigDict(frozen=True)

    tick: int = Field(0, ge=0)
    t: float = 0.0
    vehicles: List[VehicleState]
    road: RoadSpec

    @field_validator("vehicles")
    @classmethod
    def validate_unique_ids(cls, v: List[VehicleState]) -> List[VehicleState]:
        """Vehicle ids are unique."""
        ids = [vehicle.id for vehicle in v]
        if len(ids) != len(set(ids)):
            raise ValueError("vehicle ids must be unique")
        if not ids:
            raise ValueError("a world needs at least one vehicle")
        return v

    @property
    def ego(self) -> VehicleState:
        return self.vehicles[0]

    def vehicle(self, vehicle_id: str) -> VehicleState:
        """Look up a vehicle by id."""
        for vehicle in self.vehicles:
            if vehicle.id == vehicle_id:
                return vehicle
        raise KeyError(vehicle_id)

    def lateral_position(self, vehicle: VehicleState) -> float:
        return self.road.lane_center(vehicle.lane_id) + vehicle.lat_offset


class TerminalKind(str, Enum):
    """How an episode ended."""

    COMPLETED = "completed"
    COLLISION = "collision"
    RUNTIME_ERROR = "runtime_error"
    PROTOCOL_ERROR = "protocol_error"
    PROTOCOL_TIMEOUT = "protocol_timeout"
    HANDSHAKE_FAILED = "handshake_failed"


ABORTED_KINDS = frozenset(
    {
        TerminalKind.RUNTIME_ERROR,
        TerminalKind.PROTOCOL_ERROR,
        TerminalKind.PROTOCOL_TIMEOUT,
        TerminalKind.HANDSHAKE_FAILED,
    }
)


class Terminal(BaseModel):
    """Episode terminal event."""

    model_config = ConfigDict(frozen=True)

    kind: TerminalKind
    tick: int = 0
    detail: str = ""

    @property
    def aborted(self) -> bool:
        """The candidate, not the scenario, ended the episode."""
        return self.kind in ABORTED_KINDS


class Snapshot(BaseModel):
    """One tick: the world the controller saw, its reply and what happened."""

    model_config = ConfigDict(frozen=True)

    tick: int
    world: WorldState
    request: Optional[ControlRequest] = None
    touched: List[Channel] = Field(default_factory=list)
    events: List[str] = Field(default_factory=list)


class Trace(BaseModel):
    """Everything recorded during one closed-loop episode."""

    model_config = ConfigDict(frozen=True)

    scenario_id: str
    ego_id: str = "ego"
    dt: float
    horizon: float
    snapshots: List[Snapshot] = Field(default_factory=list)
    terminal: Terminal
    final_world: Optional[WorldState] = None
    stderr_tail: str = ""

    @model_validator(mode="after")
    def validate_terminal_tick(self) -> "Trace":
        """Terminal ticks stay inside the recorded range."""
        if self.snapshots and self.terminal.tick > self.snapshots[-1].tick + 1:
            raise ValueError("terminal tick beyond the last snapshot")
        return self

    @property
    def initial_world(self) -> Optional[WorldState]:
        if self.snapshots:
            return self.snapshots[0].world
        return self.final_world

    @property
    def worlds(self) -> List[WorldState]:
        """Every recorded world including the final one."""
        worlds = [snapshot.world for snapshot in self.snapshots]
        if self.final_world is not None and (
            not worlds or worlds[-1].tick != self.final_world.tick
        ):
            worlds.append(self.final_world)
        return worlds
