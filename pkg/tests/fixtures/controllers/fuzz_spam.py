import sys

print("ready", flush=True)
sys.stdin.readline()
for line in sys.stdin:
    print("{}", flush=True)
    print("{}", flush=True)
