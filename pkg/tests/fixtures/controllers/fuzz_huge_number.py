import sys

print("ready", flush=True)
sys.stdin.readline()
for line in sys.stdin:
    print('{"target_speed": 1' + "0" * 400 + "}", flush=True)
