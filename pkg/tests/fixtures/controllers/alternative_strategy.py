"""Slows down through target_speed instead of braking."""
import json
import sys


def control(obs):
    if obs["ego"]["speed"] > 10.0:
        return {"target_speed": 8.0}
    return {}


print("ready", flush=True)
sys.stdin.readline()
for line in sys.stdin:
    print(json.dumps(control(json.loads(line))), flush=True)
