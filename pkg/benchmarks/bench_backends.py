"""Compare the compiled and pure-Python simulation kernels.

Runs identical trajectories through both backends and reports events per
second plus the speedup.  The two must agree bit-for-bit on every record;
this is asserted, so the benchmark doubles as an equivalence check.

Usage: python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from cplab import _sim_py
from cplab.graphs import glue_star_path, sample_er, sample_irg
from cplab.weights import WeightModel

try:
    from cplab import _sim_core
except ImportError:
    raise SystemExit("compiled kernel not built; run pip install -e . first")


def run(kernel, g, lam, t_max, seeds):
    mask = np.ones(g.n, dtype=bool)
    t0 = time.perf_counter()
    out = [kernel(g.indptr, g.indices, lam, mask, t_max, s) for s in seeds]
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()
    scale = 0.2 if args.quick else 1.0

    cases = [
        ("path-20", glue_star_path(20, 1), 0.8, 200.0, int(200 * scale)),
        ("stars 8x32", glue_star_path(8, 32), 0.35, 400.0, int(100 * scale)),
        ("er n=1e3", sample_er(1000, 8.0, seed=1), 0.15, 100.0, int(50 * scale)),
        (
            "irg n=5e3",
            sample_irg(5000, WeightModel.powerlaw(2.5), seed=2),
            0.2,
            50.0,
            max(2, int(20 * scale)),
        ),
    ]

    print(f"{'case':<12} {'events':>10} {'python s':>10} {'compiled s':>11} {'speedup':>8}")
    for name, g, lam, t_max, reps in cases:
        seeds = range(reps)
        t_py, out_py = run(_sim_py.run_extinction, g, lam, t_max, seeds)
        t_cy, out_cy = run(_sim_core.run_extinction, g, lam, t_max, seeds)
        assert out_py == out_cy, f"backend mismatch on {name}"
        events = sum(r[2] for r in out_py)
        print(f"{name:<12} {events:>10} {t_py:>10.3f} {t_cy:>11.3f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
