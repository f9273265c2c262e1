"""
Trace serialization (line-delimited JSON), hashing and human-readable exports.

Layout, one JSON object per line (see docs/TRACE_FORMAT.md):
``header`` line, one ``tick`` line per snapshot, ``terminal`` line.
"""
import csv
import hashlib
import io
import json
from typing import Any, Dict, List

from app.core.errors import TraceParseError
from app.models.sim import Snapshot, Terminal, Trace, WorldState

CSV_COLUMNS = [
    "tick",
    "t",
    "ego_s",
    "ego_lane",
    "ego_lat_offset",
    "ego_speed",
    "brake",
    "target_speed",
    "switch_lane",
    "touched",
    "events",
]


def _line(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=False) + "\n"


def serialize_trace(trace: Trace) -> str:
    """
    Serialize a trace with stable field order.

    Args:
        trace: Trace to write

    Returns:
        str: JSONL text; identical traces give identical bytes
    """
    parts = [
        _line(
            {
                "type": "header",
                "scenario_id": trace.scenario_id,
                "ego_id": trace.ego_id,
                "dt": trace.dt,
                "horizon": trace.horizon,
            }
        )
    ]
    for snapshot in trace.snapshots:
        parts.append(_line({"type": "tick", **snapshot.model_dump(mode="json")}))
    parts.append(
        _line(
            {
                "type": "terminal",
                **trace.terminal.model_dump(mode="json"),
                "final_world": (
                    trace.final_world.model_dump(mode="json") if trace.final_world else None
                ),
                "stderr_tail": trace.stderr_tail,
            }
        )
    )
    return "".join(parts)


def trace_hash(trace: Trace) -> str:
    """SHA-256 of the serialized trace."""
    return hashlib.sha256(serialize_trace(trace).encode("utf-8")).hexdigest()


def parse_trace(text: str) -> Trace:
    """
    Parse a serialized trace.

    Raises:
        TraceParseError: With the byte offset of the first bad line
    """
    offset = 0
    header: Dict[str, Any] = {}
    snapshots: List[Snapshot] = []
    terminal: Dict[str, Any] = {}

    for raw in text.encode("utf-8").splitlines(keepends=True):
        line_offset = offset
        offset += len(raw)
        if not raw.strip():
            continue
        if terminal:
            raise TraceParseError("content after the terminal record", line_offset)
        try:
            record = json.loads(raw)
            kind = record.pop("type")
            if not header and kind != "header":
                raise ValueError("trace must start with a header record")
            if kind == "header":
                if header:
                    raise ValueError("duplicate header record")
                header = record
            elif kind == "tick":
                snapshots.append(Snapshot.model_validate(record))
            elif kind == "terminal":
                terminal = record
            else:
                raise ValueError(f"unknown record type {kind!r}")
        except (ValueError, KeyError, TypeError, AttributeError) as e:
            raise TraceParseError(str(e).splitlines()[0], line_offset) from e

    if not header:
        raise TraceParseError("empty trace", 0)
    if not terminal:
        raise TraceParseError("missing terminal record", offset)
    try:
        final_world = terminal.pop("final_world", None)
        stderr_tail = terminal.pop("stderr_tail", "")
        return Trace(
            scenario_id=header["scenario_id"],
            ego_id=header.get("ego_id", "ego"),
            dt=header["dt"],
            horizon=header["horizon"],
            snapshots=snapshots,
            terminal=Terminal.model_validate(terminal),
            final_world=WorldState.model_validate(final_world) if final_world else None,
            stderr_tail=stderr_tail,
        )
    except (ValueError, KeyError) as e:
        raise TraceParseError(str(e).splitlines()[0], offset) from e


def _request_cells(snapshot: Snapshot) -> List[str]:
    request = snapshot.request
    if request is None:
        return ["", "", ""]
    target = "" if request.target_speed is None else f"{request.target_speed:.3f}"
    return [str(request.brake).lower(), target, str(request.switch_lane)]


def render_csv(trace: Trace) -> str:
    """One row per snapshot, ego state plus the request."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for snapshot in trace.snapshots:
        ego = snapshot.world.vehicle(trace.ego_id)
        writer.writerow(
            [
                snapshot.tick,
                f"{snapshot.world.t:.2f}",
                f"{ego.s:.3f}",
                ego.lane_id,
                f"{ego.lat_offset:.3f}",
                f"{ego.speed:.3f}",
                *_request_cells(snapshot),
                "|".join(channel.value for channel in snapshot.touched),
                "|".join(snapshot.events),
            ]
        )
    return buffer.getvalue()


def render_timeline(trace: Trace) -> str:
    """
    Human-readable timeline.

    Prints the header, then only the ticks where something happens: a channel
    is touched, an event fires or the ego lane changes.
    """
    lines = [
        f"scenario {trace.scenario_id}  dt={trace.dt:g}s  horizon={trace.horizon:g}s  "
        f"ticks={len(trace.snapshots)}"
    ]
    previous_lane = None
    for snapshot in trace.snapshots:
        ego = snapshot.world.vehicle(trace.ego_id)
        notes = []
        if previous_lane is not None and ego.lane_id != previous_lane:
            notes.append(f"lane {previous_lane} -> {ego.lane_id}")
        previous_lane = ego.lane_id
        if snapshot.touched and snapshot.request is not None:
            notes.append(
                "request "
                + snapshot.request.model_dump_json(exclude_defaults=True)
            )
        notes.extend(snapshot.events)
        if notes:
            lines.append(
                f"{snapshot.tick:5d}  t={snapshot.world.t:6.2f}  s={ego.s:9.2f}  "
                f"lane={ego.lane_id:+d}  v={ego.speed:6.2f}  " + "; ".join(notes)
            )
    if trace.final_world is not None and trace.snapshots:
        ego = trace.final_world.vehicle(trace.ego_id)
        if previous_lane is not None and ego.lane_id != previous_lane:
            lines.append(
                f"{trace.final_world.tick:5d}  t={trace.final_world.t:6.2f}  "
                f"lane {previous_lane} -> {ego.lane_id}"
            )
    detail = f" ({trace.terminal.detail})" if trace.terminal.detail else ""
    lines.append(f"terminal {trace.terminal.kind.value} at tick {trace.terminal.tick}{detail}")
    return "\n".join(lines) + "\n"
