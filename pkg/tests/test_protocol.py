"""
Tests for the tick protocol codec, the handshake and in-process closed loops.
"""
import json
import random
from typing import List

import pytest

from app.core.errors import CandidateTimeoutError, ProtocolError
from app.core.functions import channel_mask
from app.models.protocol import Channel, ControlRequest
from app.models.scenario import FunctionId, TestCaseId
from app.models.sim import RoadSpec, TerminalKind, VehicleState, WorldState
from app.services.closed_loop import run_closed_loop
from app.services.controllers import (
    ScriptedController,
    brake_from,
    idle_policy,
    switch_at,
    target_speed_from,
)
from app.services.protocol import (
    build_observation,
    decode_control,
    decode_observation,
    encode_control,
    encode_observation,
    handshake,
)
from app.services.scenario_engine import instantiate_tc
from app.services.traces import serialize_trace, trace_hash


class CannedReplies:
    """Controller handle answering every observation with the same line."""

    def __init__(self, reply: bytes):
        self.reply = reply

    async def handshake(self, road: RoadSpec) -> None:
        return None

    async def exchange(self, message: bytes) -> bytes:
        return self.reply

    @property
    def stderr_tail(self) -> str:
        return ""


class FakeChannel:
    """Line channel with canned replies."""

    def __init__(self, lines: List[bytes]):
        self.lines = list(lines)
        self.sent: List[bytes] = []

    async def send_line(self, payload: bytes) -> None:
        self.sent.append(payload)

    async def receive_line(self, timeout: float) -> bytes:
        if not self.lines:
            raise CandidateTimeoutError()
        return self.lines.pop(0)


def sample_world() -> WorldState:
    return WorldState(
        tick=3,
        t=0.15,
        vehicles=[
            VehicleState(id="ego", s=100.123456789, lane_id=-3, speed=33.333333333),
            VehicleState(id="lead", s=140.0, lane_id=-3, speed=20.0, heading=1),
        ],
        road=RoadSpec(),
    )


class TestObservationEncoding:
    """Test the harness-side observation encoder."""

    def test_canonical_layout(self):
        """Test key order, fixed precision and the newline terminator."""
        message = encode_observation(sample_world(), "ego")
        assert message.endswith(b"\n")
        assert message.count(b"\n") == 1
        text = message.decode("utf-8")
        assert text.startswith('{"type":"observation","t":0.150000,"ego":{"s":100.123457,')
        assert '"others":[{"id":"lead","s":140.000000,"lane_id":-3' in text
        assert '"road":{"drivable_lanes":[-4,-3,-2],"lane_width":3.500000}' in text

    def test_encoding_is_deterministic(self):
        """Test that equal worlds give identical bytes."""
        assert encode_observation(sample_world(), "ego") == encode_observation(
            sample_world(), "ego"
        )

    def test_ego_excluded_from_others(self):
        """Test that the controlled vehicle is not listed among the others."""
        observation = decode_observation(encode_observation(sample_world(), "ego"))
        assert [agent.id for agent in observation.others] == ["lead"]
        assert observation.ego.speed == 33.333333


class TestControlDecoding:
    """Test the reply decoder."""

    def test_empty_reply_touches_nothing(self):
        """Test that an empty object is a valid no-op."""
        decoded = decode_control(b"{}\n")
        assert decoded.request == ControlRequest()
        assert decoded.touched == frozenset()

    def test_off_mask_channels_are_reported_not_rejected(self):
        """Test that channels outside the mask are decoded and flagged."""
        decoded = decode_control(
            b'{"brake": true, "switch_lane": 1}', channel_mask(FunctionId.F4, allow_brake=False)
        )
        assert decoded.request.brake is True
        assert decoded.touched == frozenset({Channel.BRAKE, Channel.SWITCH_LANE})
        assert decoded.off_mask == frozenset({Channel.BRAKE})

    def test_negative_target_speed_is_accepted(self):
        """Test that a negative target_speed passes the decoder."""
        assert decode_control(b'{"target_speed": -5}').request.target_speed == -5.0

    @pytest.mark.parametrize(
        ("message", "fragment"),
        [
            (b"not json", "malformed reply"),
            (b"[1, 2]", "JSON object"),
            (b'{"steer": 0.1}', "unknown reply keys: steer"),
            (b'{"brake": 1}', "brake must be a boolean"),
            (b'{"target_speed": "fast"}', "target_speed must be a number"),
            (b'{"target_speed": NaN}', "malformed reply"),
            (b'{"target_speed": 1' + b"0" * 400 + b"}", "target_speed must be finite"),
            (b'{"switch_lane": 2}', "switch_lane out of range"),
            (b'{"switch_lane": true}', "switch_lane must be an integer"),
            (b"\xff\xfe", "malformed reply"),
        ],
    )
    def test_malformed_replies(self, message, fragment):
        """Test that malformed replies raise ProtocolError with a reason."""
        with pytest.raises(ProtocolError) as exc_info:
            decode_control(message)
        assert fragment in exc_info.value.detail

    def test_control_encoder_writes_only_touched_channels(self):
        """Test the candidate-side encoder."""
        assert encode_control(ControlRequest(switch_lane=-1)) == b'{"switch_lane":-1}\n'
        assert encode_control(ControlRequest()) == b"{}\n"


class TestRoundTrip:
    """Test encode/decode identity over randomized worlds and replies."""

    def test_observation_round_trip(self):
        """Test that a decoded observation equals the one built at wire precision."""
        rng = random.Random(2024)
        for tick in range(200):
            vehicles = [
                VehicleState(
                    id=f"v{index}" if index else "ego",
                    s=rng.uniform(-50.0, 2000.0),
                    lane_id=rng.choice([-1, -2, -3, -4, -5]),
                    lat_offset=rng.uniform(-3.5, 3.5),
                    speed=rng.uniform(0.0, 60.0),
                    heading=rng.choice([-1, 1]),
                )
                for index in range(rng.randint(1, 6))
            ]
            world = WorldState(tick=tick, t=tick * 0.05, vehicles=vehicles, road=RoadSpec())
            message = encode_observation(world, "ego")
            assert decode_observation(message) == build_observation(world, "ego")
            assert encode_observation(world, "ego") == message

    def test_control_round_trip(self):
        """Test that every valid reply decodes to the request it was encoded from."""
        rng = random.Random(7)
        for _ in range(500):
            target = rng.choice([None, rng.uniform(-10.0, 60.0), float(rng.randint(0, 40))])
            request = ControlRequest(
                brake=rng.random() < 0.5,
                target_speed=target,
                switch_lane=rng.choice([-1, 0, 1]),
            )
            assert decode_control(encode_control(request)).request == request


class TestHandshake:
    """Test the ready/road handshake."""

    async def test_ready_then_road(self):
        """Test that the road message follows the ready line."""
        channel = FakeChannel([b"ready"])
        await handshake(channel, RoadSpec(), timeout=1.0)
        road = json.loads(channel.sent[0])
        assert road["type"] == "road"
        assert road["drivable_lanes"] == [-4, -3, -2]

    async def test_wrong_first_line(self):
        """Test that anything but ready fails the handshake."""
        with pytest.raises(ProtocolError) as exc_info:
            await handshake(FakeChannel([b"hello"]), RoadSpec(), timeout=1.0)
        assert "expected ready line" in exc_info.value.detail

    async def test_silence(self):
        """Test that a missing ready line fails the handshake."""
        with pytest.raises(ProtocolError) as exc_info:
            await handshake(FakeChannel([]), RoadSpec(), timeout=0.1)
        assert "no ready line" in exc_info.value.detail


class TestClosedLoop:
    """Test closed-loop episodes with in-process controllers."""

    async def test_trace_bytes_are_reproducible(self):
        """Test that two runs of the same controller give identical traces."""
        scenario = instantiate_tc(TestCaseId.TC1)
        first = await run_closed_loop(scenario, ScriptedController(brake_from(100)))
        second = await run_closed_loop(scenario, ScriptedController(brake_from(100)))
        assert serialize_trace(first) == serialize_trace(second)
        assert trace_hash(first) == trace_hash(second)
        assert first.terminal.kind == TerminalKind.COMPLETED

    async def test_idle_controller_collides(self):
        """Test that the episode stops at the ego collision."""
        scenario = instantiate_tc(TestCaseId.TC1)
        trace = await run_closed_loop(scenario, ScriptedController(idle_policy))
        assert trace.terminal.kind == TerminalKind.COLLISION
        assert trace.terminal.tick == len(trace.snapshots)
        assert "cutter" in trace.terminal.detail

    async def test_snapshot_records_request(self):
        """Test that each snapshot keeps the world seen and the reply given."""
        scenario = instantiate_tc(TestCaseId.S2)
        trace = await run_closed_loop(scenario, ScriptedController(switch_at(5, direction=-1)))
        snapshot = trace.snapshots[5]
        assert snapshot.tick == 5
        assert snapshot.request == ControlRequest(switch_lane=-1)
        assert snapshot.touched == [Channel.SWITCH_LANE]
        assert trace.final_world is not None
        assert trace.final_world.ego.lane_id == -3

    async def test_stop_request_over_the_wire(self):
        """Test that a stop request at cut-in completion avoids the cutter in TC1."""
        scenario = instantiate_tc(TestCaseId.TC1)
        trace = await run_closed_loop(scenario, ScriptedController(target_speed_from(100, -5.0)))
        assert trace.terminal.kind == TerminalKind.COMPLETED
        assert trace.snapshots[100].touched == [Channel.TARGET_SPEED]
        assert trace.snapshots[99].touched == []

    async def test_policy_exception_is_a_runtime_error(self):
        """Test that a crashing controller ends the episode with runtime_error."""

        def policy(observation):
            return ControlRequest(target_speed=1 / 0)

        scenario = instantiate_tc(TestCaseId.TC6)
        trace = await run_closed_loop(scenario, ScriptedController(policy))
        assert trace.terminal.kind == TerminalKind.RUNTIME_ERROR
        assert trace.terminal.tick == 0
        assert "ZeroDivisionError" in trace.stderr_tail

    async def test_oversized_number_is_a_protocol_error(self):
        """Test that an integer too large for a float ends the episode as a protocol error."""
        reply = b'{"target_speed": 1' + b"0" * 400 + b"}\n"
        trace = await run_closed_loop(instantiate_tc(TestCaseId.TC6), CannedReplies(reply))
        assert trace.terminal.kind == TerminalKind.PROTOCOL_ERROR
        assert trace.terminal.tick == 0
        assert trace.terminal.detail == "target_speed must be finite"
