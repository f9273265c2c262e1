"""
Registry of the driving functions: prompt descriptions, channel masks and test cases.
"""
from dataclasses import dataclass
from typing import Dict, FrozenSet, Optional, Tuple

from app.config import settings
from app.core.errors import ConfigurationError
from app.models.protocol import Channel, ChannelMask
from app.models.scenario import FunctionId, TestCaseId


@dataclass(frozen=True)
class FunctionSpec:
    """Static description of one driving function."""

    function_id: FunctionId
    name: str
    description: str  # appended to the prompt template
    channels: FrozenSet[Channel]
    test_cases: Tuple[TestCaseId, ...]
    needs_action: Tuple[TestCaseId, ...]  # test cases where doing nothing fails


FUNCTIONS: Dict[FunctionId, FunctionSpec] = {
    FunctionId.F1: FunctionSpec(
        function_id=FunctionId.F1,
        name="speed_threshold_brake",
        description=(
            "Write a controller that starts braking if the speed of the ego vehicle "
            "exceeds 10 m/s."
        ),
        channels=frozenset({Channel.BRAKE}),
        test_cases=(TestCaseId.S1,),
        needs_action=(TestCaseId.S1,),
    ),
    FunctionId.F2: FunctionSpec(
        function_id=FunctionId.F2,
        name="lane_change_right",
        description=(
            "Write a controller that performs a lane change to the right if there is a "
            "vehicle in the same lane as the ego vehicle."
        ),
        channels=frozenset({Channel.SWITCH_LANE}),
        test_cases=(TestCaseId.S2,),
        needs_action=(TestCaseId.S2,),
    ),
    FunctionId.F3: FunctionSpec(
        function_id=FunctionId.F3,
        name="adaptive_cruise_control",
        description=(
            "Write an adaptive cruise control. The ego vehicle keeps its initial speed and "
            "adapts its speed to the vehicle in front to avoid a collision."
        ),
        channels=frozenset({Channel.TARGET_SPEED}),
        test_cases=(
            TestCaseId.TC1,
            TestCaseId.TC2,
            TestCaseId.TC3,
            TestCaseId.TC6,
            TestCaseId.TC7,
        ),
        needs_action=(TestCaseId.TC1, TestCaseId.TC2, TestCaseId.TC3),
    ),
    FunctionId.F4: FunctionSpec(
        function_id=FunctionId.F4,
        name="collision_avoidance_evasive_manoeuvre",
        description=(
            "Write a collision avoidance function that performs a lane change to avoid an "
            "imminent collision with the vehicle in front. The evasive lane change should "
            "preferably be conducted to the left."
        ),
        channels=frozenset({Channel.SWITCH_LANE}),
        test_cases=(
            TestCaseId.TC1,
            TestCaseId.TC2,
            TestCaseId.TC3,
            TestCaseId.TC4,
            TestCaseId.TC5,
            TestCaseId.TC6,
            TestCaseId.TC7,
        ),
        needs_action=(
            TestCaseId.TC1,
            TestCaseId.TC2,
            TestCaseId.TC3,
            TestCaseId.TC4,
            TestCaseId.TC5,
        ),
    ),
}

# Expected evasive direction per test case for the evasive-manoeuvre function.
EVASION_DIRECTION: Dict[TestCaseId, int] = {
    TestCaseId.TC1: 1,
    TestCaseId.TC2: 1,
    TestCaseId.TC3: 1,
    TestCaseId.TC4: -1,
    TestCaseId.TC5: -1,
}


def get_function(function_id: FunctionId) -> FunctionSpec:
    """Look up a function, raising ConfigurationError for unknown ids."""
    try:
        return FUNCTIONS[FunctionId(function_id)]
    except (KeyError, ValueError) as e:
        raise ConfigurationError(f"unknown function {function_id!r}") from e


def channel_mask(function_id: FunctionId, allow_brake: Optional[bool] = None) -> ChannelMask:
    """
    Channels a function may touch.

    Args:
        function_id: Function under test
        allow_brake: Override for CAEM_ALLOW_BRAKE (F4 only)

    Returns:
        ChannelMask: Permitted channels
    """
    spec = get_function(function_id)
    channels = set(spec.channels)
    if allow_brake is None:
        allow_brake = settings.CAEM_ALLOW_BRAKE
    if spec.function_id == FunctionId.F4 and allow_brake:
        channels.add(Channel.BRAKE)
    return ChannelMask(allowed=frozenset(channels))


def cases_for(function_id: FunctionId) -> Tuple[TestCaseId, ...]:
    """Test cases a function is evaluated on."""
    return get_function(function_id).test_cases
