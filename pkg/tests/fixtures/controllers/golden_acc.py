"""Adaptive cruise control on the nearest same-lane vehicle ahead."""
import json
import sys

VEHICLE_LENGTH = 5.0
TIME_GAP = 2.0
MIN_GAP = 10.0
# below zero: full deceleration all the way to standstill
STOP_TARGET = -5.0


def lead_vehicle(ego, others):
    ahead = [
        other
        for other in others
        if other["heading"] == 1 and other["lane_id"] == ego["lane_id"] and other["s"] > ego["s"]
    ]
    return min(ahead, key=lambda other: other["s"]) if ahead else None


def control(obs):
    ego = obs["ego"]
    lead = lead_vehicle(ego, obs["others"])
    if lead is None:
        return {}
    gap = lead["s"] - ego["s"] - VEHICLE_LENGTH
    if gap < max(TIME_GAP * ego["speed"], MIN_GAP):
        return {"target_speed": STOP_TARGET}
    return {"target_speed": min(lead["speed"], ego["speed"])}


def main():
    print("ready", flush=True)
    sys.stdin.readline()
    for line in sys.stdin:
        reply = control(json.loads(line))
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
