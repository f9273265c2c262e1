"""Evasive lane change, left when that lane is free, otherwise right."""
import json
import sys

VEHICLE_LENGTH = 5.0
LOOKAHEAD_S = 2.0
TTC_LIMIT = 3.0
ENCROACH_M = 1.0
CLEARANCE_BEHIND_M = 10.0

evaded = False


def is_threat(ego, other):
    if other["heading"] != 1:
        return False
    gap = other["s"] - ego["s"] - VEHICLE_LENGTH
    if other["s"] <= ego["s"] or gap > LOOKAHEAD_S * ego["speed"]:
        return False
    if other["lane_id"] == ego["lane_id"]:
        closing = ego["speed"] - other["speed"]
        return closing > 0 and gap / closing < TTC_LIMIT
    if other["lane_id"] == ego["lane_id"] + 1:
        return other["lat_offset"] < -ENCROACH_M
    if other["lane_id"] == ego["lane_id"] - 1:
        return other["lat_offset"] > ENCROACH_M
    return False


def lane_free(obs, lane, threat_id):
    ego = obs["ego"]
    if lane not in obs["road"]["drivable_lanes"]:
        return False
    reach = LOOKAHEAD_S * ego["speed"] + VEHICLE_LENGTH
    for other in obs["others"]:
        if other["id"] == threat_id or other["lane_id"] != lane:
            continue
        if -CLEARANCE_BEHIND_M < other["s"] - ego["s"] < reach:
            return False
    return True


def control(obs):
    global evaded
    if evaded:
        return {}
    ego = obs["ego"]
    threats = [other for other in obs["others"] if is_threat(ego, other)]
    if not threats:
        return {}
    threat_id = threats[0]["id"]
    for direction in (1, -1):
        if lane_free(obs, ego["lane_id"] + direction, threat_id):
            evaded = True
            return {"switch_lane": direction}
    return {}


def main():
    print("ready", flush=True)
    sys.stdin.readline()
    for line in sys.stdin:
        reply = control(json.loads(line))
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
