"""
Pydantic models for scenarios and cut-in calibration.
"""
from enum import Enum
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.sim import RoadSpec, VehicleState


class FunctionId(str, Enum):
    """Driving functions candidates are generated for."""

    F1 = "F1"  # speed-threshold braking
    F2 = "F2"  # lane change right when the lane is shared
    F3 = "F3"  # adaptive cruise control
    F4 = "F4"  # collision avoidance by evasive manoeuvre


class TestCaseId(str, Enum):
    """Shipped scenarios."""

    __test__ = False

    TC1 = "TC1"
    TC2 = "TC2"
    TC3 = "TC3"
    TC4 = "TC4"
    TC5 = "TC5"
    TC6 = "TC6"
    TC7 = "TC7"
    S1 = "S1"
    S2 = "S2"


class ActionKind(str, Enum):
    """Scripted action kinds."""

    LANE_CHANGE = "lane_change"
    SET_ACCEL = "set_accel"
    HOLD = "hold"


class Action(BaseModel):
    """A scripted action applied to one agent."""

    model_config = ConfigDict(frozen=True)

    kind: ActionKind
    accel: Optional[float] = None
    direction: Optional[Literal[-1, 1]] = None

    @model_validator(mode="after")
    def validate_arguments(self) -> "Action":
        """Each kind carries exactly its own argument."""
        if self.kind == ActionKind.SET_ACCEL and self.accel is None:
            raise ValueError("set_accel needs an acceleration")
        if self.kind == ActionKind.LANE_CHANGE and self.direction is None:
            raise ValueError("lane_change needs a direction")
        return self

    def describe(self) -> str:
        """Render the action in scenario-file syntax."""
        if self.kind == ActionKind.SET_ACCEL:
            return f"set_accel({self.accel!r})"
        if self.kind == ActionKind.LANE_CHANGE:
            return f"lane_change({'left' if self.direction == 1 else 'right'})"
        return "hold"


class ScriptEvent(BaseModel):
    """A timed action."""

    model_config = ConfigDict(frozen=True)

    t_fire: float = Field(..., ge=0.0)
    agent: str
    action: Action


class Scenario(BaseModel):
    """Road, initial placements and scripted events. Immutable once built."""

    model_config = ConfigDict(frozen=True)

    id: str = Field(..., min_length=1)
    road: RoadSpec = Field(default_factory=RoadSpec)
    placements: List[VehicleState] = Field(..., min_length=1)
    script: List[ScriptEvent] = Field(default_factory=list)
    horizon: float = Field(30.0, gt=0.0)
    functions: List[FunctionId] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_consistency(self) -> "Scenario":
        """Unique ids, known agents and time-ordered events."""
        ids = [vehicle.id for vehicle in self.placements]
        if len(ids) != len(set(ids)):
            raise ValueError("placement ids must be unique")
        known = set(ids)
        for event in self.script:
            if event.agent not in known:
                raise ValueError(f"unknown agent {event.agent!r}")
        times = [event.t_fire for event in self.script]
        if times != sorted(times):
            raise ValueError("script events must be sorted by t_fire")
        return self

    @property
    def ego(self) -> VehicleState:
        return self.placements[0]


class CutinParams(BaseModel):
    """Calibrated cut-in parameters."""

    model_config = ConfigDict(frozen=True)

    ego_speed: float = Field(..., gt=0.0)
    lead_overspeed: float = Field(..., ge=0.0, description="Approach speed delta (m/s)")
    gap_at_cutin: float = Field(..., gt=0.0, description="Bumper gap at cut-in completion (m)")
    lead_decel: float = Field(..., lt=0.0)
    ttb_target: float = Field(..., gt=0.0)
