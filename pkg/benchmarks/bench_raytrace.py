"""Compare the compiled and pure-Python ray tracers.

Usage::

    python benchmarks/bench_raytrace.py [--rays 2000] [--repeat 3]

Both backends trace the same random lines through 2D and 3D grids; the
script checks that they agree and reports the best wall time of each.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from tvoed.grid import Grid
from tvoed.raytrace import BACKENDS, trace_batch


def random_lines(rng, dim, count):
    origins = 0.5 + 0.3 * rng.standard_normal((count, dim))
    directions = rng.standard_normal((count, dim))
    return origins, directions


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rays", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    cases = [("2d", Grid(2, 64)), ("3d", Grid(3, 25))]
    results = []
    for name, grid in cases:
        origins, directions = random_lines(rng, grid.dim, args.rays)
        row = {"case": name, "N": grid.N, "rays": args.rays}
        ref = None
        for backend in sorted(BACKENDS):
            sec, A = best_time(
                lambda: trace_batch(grid, origins, directions, backend=backend), args.repeat)
            row[f"{backend}_s"] = sec
            if ref is None:
                ref = A
            else:
                row["max_abs_diff"] = float(abs(A - ref).max()) if A.nnz or ref.nnz else 0.0
        if "cython" in BACKENDS:
            row["speedup"] = row["python_s"] / row["cython_s"]
        results.append(row)
        print(json.dumps(row))
    if "cython" not in BACKENDS:
        print("compiled backend not built; only the fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
