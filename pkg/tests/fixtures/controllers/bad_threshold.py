"""Evades to the left, but only once the time to collision is below 0.1 s."""
import json
import sys

VEHICLE_LENGTH = 5.0
TTC_TRIGGER = 0.1

evaded = False


def control(obs):
    global evaded
    ego = obs["ego"]
    ahead = [
        other
        for other in obs["others"]
        if other["lane_id"] == ego["lane_id"] and other["s"] > ego["s"]
    ]
    if evaded or not ahead:
        return {}
    lead = min(ahead, key=lambda other: other["s"])
    closing = ego["speed"] - lead["speed"]
    if closing <= 0:
        return {}
    ttc = (lead["s"] - ego["s"] - VEHICLE_LENGTH) / closing
    if ttc < TTC_TRIGGER:
        evaded = True
        return {"switch_lane": 1}
    return {}


print("ready", flush=True)
sys.stdin.readline()
for line in sys.stdin:
    print(json.dumps(control(json.loads(line))), flush=True)
