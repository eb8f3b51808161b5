"""Compare the numba kernels against the pure-Python fallback.

Each backend runs in its own interpreter because the switch is read at
import time. Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from hamshade._jit import backend
from hamshade.flow import flow_at, tangent_flow
from hamshade.hamsys import henon_heiles
repeat = int(sys.argv[1])
hh = henon_heiles()
x0 = np.array([0.0, 0.1, 0.3, 0.05])
flow_at(hh, x0, 0.01)
tangent_flow(hh, x0, 0.01)  # compile (or warm) outside the timing
cases = {"flow_at t=10": lambda: flow_at(hh, x0, 10.0),
         "tangent_flow t=10": lambda: tangent_flow(hh, x0, 10.0)}
out = {"backend": backend()}
for name, fn in cases.items():
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
print(json.dumps(out))
"""


def run_backend(no_jit, repeat):
    env = dict(os.environ)
    env.pop("HAMSHADE_NO_JIT", None)
    if no_jit:
        env["HAMSHADE_NO_JIT"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast, slow = run_backend(False, args.repeat), run_backend(True, args.repeat)
    print(f"{'case':<20} {'numba [s]':>10} {'python [s]':>11} {'speedup':>8}")
    for case in (k for k in fast if k != "backend"):
        print(f"{case:<20} {fast[case]:>10.4f} {slow[case]:>11.4f} {slow[case] / fast[case]:>7.1f}x")


if __name__ == "__main__":
    main()
