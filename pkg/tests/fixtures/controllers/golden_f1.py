"""Brakes while the ego speed is above 10 m/s."""
import json
import sys

SPEED_LIMIT = 10.0


def control(obs):
    if obs["ego"]["speed"] > SPEED_LIMIT:
        return {"brake": True}
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
