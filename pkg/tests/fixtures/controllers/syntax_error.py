import json
import sys


def control(obs):
    if obs["ego"]["speed"] > 10.0
        return {"brake": True}
    return {}


print("ready", flush=True)
sys.stdin.readline()
for line in sys.stdin:
    print(json.dumps(control(json.loads(line))), flush=True)
