"""Treats the first listed vehicle as the lead, whatever its lane or direction."""
import json
import sys

VEHICLE_LENGTH = 5.0
TIME_GAP = 2.0
MIN_GAP = 10.0

stopping = False


def control(obs):
    global stopping
    ego = obs["ego"]
    if not obs["others"]:
        return {}
    lead = obs["others"][0]
    gap = lead["s"] - ego["s"] - VEHICLE_LENGTH
    if lead["s"] > ego["s"] and gap < max(TIME_GAP * ego["speed"], MIN_GAP):
        stopping = True
    if stopping:
        return {"target_speed": 0.0}
    return {}


print("ready", flush=True)
sys.stdin.readline()
for line in sys.stdin:
    print(json.dumps(control(json.loads(line))), flush=True)
