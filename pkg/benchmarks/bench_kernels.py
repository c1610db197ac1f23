"""Compare the compiled and pure-Python propagation kernels.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--json out.json]
"""

import argparse
import json
import math
import time

import numpy as np

from srpsort import kernels
from srpsort.dynamics import kernel_params, to_kernel
from srpsort.ejection import spec_for_phase, spec_to_state
from srpsort.model import build_system

CASES = {
    # multi-revolution grain, 10 km / 3 h body, ~3 orbits
    "orbit": dict(R=1e4, T=3 * 3600.0, v=9.5, phi=math.pi / 2, beta=0.0045, t_max=40 * 3600.0),
    # short on-ground hop on a 100 m / 5 h body
    "hop": dict(R=100.0, T=5 * 3600.0, v=0.0235, phi=1.5 * math.pi, beta=0.0016, t_max=3600.0),
}


def setup(case):
    s = build_system(case["R"], 2600.0, case["T"])
    spec = spec_for_phase(s, case["phi"], case["v"])
    y0 = to_kernel(spec_to_state(spec, s), s)
    return y0, kernel_params(s, case["beta"]), case["t_max"] / s.time_unit


def run_once(backend, y0, params, t_max):
    t = time.perf_counter()
    out = kernels.propagate(y0, params, t_max, 1e-12, 1e-14, 100.0, sample_every=0,
                            backend=backend)
    return time.perf_counter() - t, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write timings to this file")
    args = ap.parse_args(argv)
    report = {}
    backends = kernels.available_backends()
    for name, case in CASES.items():
        y0, params, t_max = setup(case)
        row = {}
        finals = {}
        for b in backends:
            times = []
            for _ in range(args.repeat if b == "compiled" else max(1, args.repeat // 2)):
                dt, out = run_once(b, y0, params, t_max)
                times.append(dt)
            finals[b] = np.asarray(out["y"])
            row[b] = {"best_s": min(times), "steps": int(out["nsteps"]),
                      "us_per_step": 1e6 * min(times) / max(1, out["nsteps"])}
        if "compiled" in row:
            row["speedup"] = row["python"]["best_s"] / row["compiled"]["best_s"]
            row["max_state_diff"] = float(np.max(np.abs(finals["compiled"] - finals["python"])))
        report[name] = row
        line = "  ".join(f"{b}: {row[b]['best_s'] * 1e3:9.2f} ms ({row[b]['steps']} steps)"
                         for b in backends)
        extra = f"  speedup x{row['speedup']:.1f}" if "speedup" in row else ""
        print(f"{name:6s} {line}{extra}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()
