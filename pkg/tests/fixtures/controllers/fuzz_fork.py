import signal
import subprocess
import sys
import time

signal.signal(signal.SIGTERM, signal.SIG_IGN)
children = [
    subprocess.Popen([sys.executable, "-c", "import time; time.sleep(120)"]) for _ in range(8)
]
print("ready", flush=True)
sys.stdin.readline()
for line in sys.stdin:
    time.sleep(10)
