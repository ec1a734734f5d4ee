"""Wall-clock comparison of the numba kernels against the plain-Python fallback.

Each backend runs in a fresh interpreter because the switch is read at import
time.  The first numba run includes compilation (or a cache load), so it is
reported separately from the warm median.

    python3 benchmarks/bench_backends.py --repeat 3
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
t0 = time.perf_counter()
import tierlab
from tierlab import config as C, metrics as M
from tierlab.engine import run
cases = json.loads(sys.argv[1])
repeat = int(sys.argv[2])
out = {"backend": tierlab.BACKEND, "import_s": time.perf_counter() - t0, "cases": {}}
for name, (preset, wl, pol, ov) in cases.items():
    cfg = C.from_preset(preset, wl, pol, ov)
    times, digest = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        m = run(cfg)
        times.append(time.perf_counter() - t)
        digest = M.export_json(m)
    out["cases"][name] = {"times": times, "events": m.completed, "json": digest.decode()}
print(json.dumps(out))
"""

CASES = {
    "chase_ldram": ["system_b", "latency_bound", "preferred:ldram", ["workload.op_count=20000"]],
    "mixed_oli": ["system_b", "MIXED_TWO_OBJECT", "oli", ["workload.op_count=20000"]],
    "skew_tpp": ["system_b", "hot_cold_skew", "first_touch@tpp",
                 ["workload.op_count=null", "workload.duration_ns=5e6",
                  "run.capacity_footprint_fraction={\"ldram\": 0.4}", "run.allowed_nodes=[\"ldram\",\"cxl\"]"]],
}


def measure(jit, repeat):
    env = dict(os.environ, TIERLAB_JIT=jit)
    res = subprocess.run([sys.executable, "-c", CHILD, json.dumps(CASES), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    fast, slow = measure("1", args.repeat), measure("0", args.repeat)
    print(f"{'case':<12} {'accesses':>9} {'python s':>9} {'numba 1st':>10} {'numba s':>8} {'speedup':>8}  match")
    for name in CASES:
        f, s = fast["cases"][name], slow["cases"][name]
        warm = sorted(f["times"][1:] or f["times"])[len(f["times"][1:] or f["times"]) // 2]
        py = sorted(s["times"])[len(s["times"]) // 2]
        same = "yes" if f["json"] == s["json"] else "NO"
        print(f"{name:<12} {f['events']:>9} {py:>9.3f} {f['times'][0]:>10.3f} {warm:>8.3f} {py / warm:>7.1f}x  {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
