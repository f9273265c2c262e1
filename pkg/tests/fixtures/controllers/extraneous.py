"""Runs its own vehicle model instead of trusting the observed speed."""
import json
import sys

DT = 0.05
ASSUMED_ACCEL = 1.5


class EgoVehicle:
    def __init__(self, speed):
        self.speed = speed

    def simulate_step(self, braking):
        self.speed += (-8.0 if braking else ASSUMED_ACCEL) * DT


vehicle = None


def control(obs):
    global vehicle
    if vehicle is None:
        vehicle = EgoVehicle(obs["ego"]["speed"])
    braking = vehicle.speed > 10.0
    vehicle.simulate_step(braking)
    return {"brake": True} if braking else {}


print("ready", flush=True)
sys.stdin.readline()
for line in sys.stdin:
    print(json.dumps(control(json.loads(line))), flush=True)
