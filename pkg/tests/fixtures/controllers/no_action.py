"""Speaks the protocol but never acts."""
import sys

print("ready", flush=True)
sys.stdin.readline()
for line in sys.stdin:
    print("{}", flush=True)
