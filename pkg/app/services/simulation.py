"""
Deterministic fixed-timestep kinematics on a straight multi-lane road.

State is quantized to 1e-9 after every step so that traces serialize to the
same bytes on every run and tick multiples of dt stay exact.
"""
from itertools import combinations
from typing import List, Tuple

from app.models.protocol import ControlRequest
from app.models.sim import LaneChange, RoadSpec, VehicleState, WorldState

DT = 0.05  # s, 20 Hz
A_BRAKE = 8.0  # m/s^2, full braking
A_ACC_MAX = 3.0  # m/s^2
T_LC = 2.0  # s per one-lane step
K_P = 1.0  # 1/s, target_speed tracking gain
PRECISION = 9


def quantize(value: float) -> float:
    """Round to the simulation precision; never returns -0.0."""
    return round(value, PRECISION) + 0.0


def clamp_accel(accel: float) -> float:
    return min(A_ACC_MAX, max(-A_BRAKE, accel))


def tick_time(tick: int, dt: float = DT) -> float:
    return quantize(tick * dt)


def step_longitudinal(v: float, a_cmd: float, dt: float = DT) -> Tuple[float, float]:
    """
    Forward-Euler speed update.

    Args:
        v: Current speed (m/s)
        a_cmd: Commanded acceleration (m/s^2), already clamped by the caller
        dt: Step length (s)

    Returns:
        tuple: (next speed, distance covered this step)
    """
    ds = quantize(v * dt)
    v_next = quantize(max(0.0, v + a_cmd * dt))
    return v_next, ds


def _sign(value: int) -> int:
    return (value > 0) - (value < 0)


def request_lane_change(vehicle: VehicleState, switch: int) -> VehicleState:
    """
    Apply a lane-change request.

    Requests compound: a request while a manoeuvre is running moves the final
    target one lane further. A request against the current step shortens the
    manoeuvre and, on a single step, sends the vehicle back to its lane centre.
    """
    if switch == 0:
        return vehicle
    lc = vehicle.lc_state
    if lc is None:
        state = LaneChange(target_lane=vehicle.lane_id + switch, progress=0.0, step=switch)
    else:
        state = lc.model_copy(update={"target_lane": lc.target_lane + switch})
    return vehicle.model_copy(update={"lc_state": state})


def step_lateral(vehicle: VehicleState, dt: float, road: RoadSpec) -> VehicleState:
    """
    Advance an in-progress lane change by one tick.

    The lateral offset is linear in step progress. A target outside the
    drivable lanes is still executed; R3 is judged by the oracle.
    """
    lc = vehicle.lc_state
    if lc is None:
        return vehicle
    rate = dt / T_LC
    desired = _sign(lc.target_lane - vehicle.lane_id)
    step = lc.step
    if lc.progress == 0.0 and desired != 0:
        step = desired

    if desired == step:
        progress = quantize(min(1.0, lc.progress + rate))
        if progress >= 1.0:
            lane_id = vehicle.lane_id + step
            remaining = None
            if lane_id != lc.target_lane:
                remaining = LaneChange(target_lane=lc.target_lane, progress=0.0, step=step)
            return vehicle.model_copy(
                update={"lane_id": lane_id, "lat_offset": 0.0, "lc_state": remaining}
            )
    else:
        # returning toward the current lane centre
        progress = quantize(max(0.0, lc.progress - rate))
        if progress <= 0.0:
            remaining = None
            if desired != 0:
                remaining = LaneChange(target_lane=lc.target_lane, progress=0.0, step=desired)
            return vehicle.model_copy(update={"lat_offset": 0.0, "lc_state": remaining})

    return vehicle.model_copy(
        update={
            "lat_offset": quantize(step * progress * road.lane_width),
            "lc_state": LaneChange(target_lane=lc.target_lane, progress=progress, step=step),
        }
    )


def resolve_ego_accel(vehicle: VehicleState, request: ControlRequest) -> float:
    """Brake wins over target_speed, which wins over the scripted baseline."""
    if request.brake:
        return -A_BRAKE
    if request.target_speed is not None:
        return clamp_accel(K_P * (request.target_speed - vehicle.speed))
    return clamp_accel(vehicle.script_accel)


def step_vehicle(
    vehicle: VehicleState, accel: float, dt: float, road: RoadSpec
) -> VehicleState:
    """Longitudinal then lateral update of one vehicle."""
    speed, ds = step_longitudinal(vehicle.speed, accel, dt)
    moved = vehicle.model_copy(
        update={
            "s": quantize(vehicle.s + vehicle.heading * ds),
            "speed": speed,
            "accel": accel,
        }
    )
    return step_lateral(moved, dt, road)


def step_world(world: WorldState, ego_request: ControlRequest, dt: float = DT) -> WorldState:
    """
    Advance the world by one tick.

    Args:
        world: Current world, ego first, script overrides already applied
        ego_request: Validated controller request for the ego vehicle
        dt: Step length (s)

    Returns:
        WorldState: World at the next tick
    """
    vehicles: List[VehicleState] = []
    for index, vehicle in enumerate(world.vehicles):
        if index == 0:
            vehicle = request_lane_change(vehicle, ego_request.switch_lane)
            accel = resolve_ego_accel(vehicle, ego_request)
        else:
            accel = clamp_accel(vehicle.script_accel)
        vehicles.append(step_vehicle(vehicle, accel, dt, world.road))

    tick = world.tick + 1
    return world.model_copy(update={"tick": tick, "t": tick_time(tick, dt), "vehicles": vehicles})


def detect_collision(world: WorldState) -> List[Tuple[str, str]]:
    """
    Pairs of vehicles whose footprints overlap with positive area.

    Touching edges do not count. Pairs are sorted by id and deduplicated.
    """
    pairs = set()
    for a, b in combinations(world.vehicles, 2):
        longitudinal = abs(a.s - b.s) < (a.length + b.length) / 2
        lateral = abs(world.lateral_position(a) - world.lateral_position(b)) < (
            a.width + b.width
        ) / 2
        if longitudinal and lateral:
            first, second = sorted((a.id, b.id))
            pairs.add((first, second))
    return sorted(pairs)


def bumper_gap(follower: VehicleState, leader: VehicleState) -> float:
    """Longitudinal gap between the follower's front and the leader's rear."""
    return leader.s - follower.s - (leader.length + follower.length) / 2
