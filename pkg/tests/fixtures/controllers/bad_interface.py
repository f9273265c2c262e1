"""Reads the ego speed from a field the interface does not have."""
import json
import sys


def control(obs):
    ego = obs["ego"]
    if ego["velocity"] > 10.0:
        return {"brake": True}
    return {}


print("ready", flush=True)
sys.stdin.readline()
for line in sys.stdin:
    print(json.dumps(control(json.loads(line))), flush=True)
