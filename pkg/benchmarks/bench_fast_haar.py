#!/usr/bin/env python3
"""Per-round cost of the Haar fast path, compiled kernels vs pure Python.

Two paths are timed for each horizon:

* ``step``: one ``FastHaarReducer.step`` call per round (Python-level loop,
  kernels used for gather/scatter only);
* ``run``: the whole KT + Haar loop inside the kernel module.

Usage: python benchmarks/bench_fast_haar.py [--d 4] [--max-log2 16] [--json out.json]
"""

import argparse
import json
import math
import time

import numpy as np

from dynreg import _backend
from dynreg.learners import FastHaarReducer


def best_of(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def time_step(T, d, backend, losses, repeats):
    def go():
        r = FastHaarReducer(T, d, backend=backend)
        for g in losses:
            r.step(g)
    return best_of(go, repeats) / T


def time_run(T, d, backend, losses, repeats):
    return best_of(lambda: FastHaarReducer(T, d, backend=backend).run(losses), repeats) / T


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=4)
    ap.add_argument("--min-log2", type=int, default=8)
    ap.add_argument("--max-log2", type=int, default=16)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args()

    backends = _backend.available()
    rows = []
    print(f"d={args.d}, per-round microseconds (best of {args.repeats})")
    header = f"{'T':>8}" + "".join(f"{b + ' ' + p:>18}" for p in ("step", "run") for b in backends)
    if "compiled" in backends:
        header += f"{'run speedup':>14}"
    print(header)
    for k in range(args.min_log2, args.max_log2 + 1):
        T = 1 << k
        losses = np.random.default_rng(k).uniform(-1, 1, size=(T, args.d)) / math.sqrt(args.d)
        row = {"T": T}
        for b in backends:
            row[f"{b}_step"] = time_step(T, args.d, b, losses, args.repeats)
            row[f"{b}_run"] = time_run(T, args.d, b, losses, args.repeats)
        line = f"{T:>8}" + "".join(f"{row[f'{b}_{p}'] * 1e6:>18.3f}" for p in ("step", "run") for b in backends)
        if "compiled" in backends:
            line += f"{row['python_run'] / row['compiled_run']:>13.1f}x"
        print(line)
        rows.append(row)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"d": args.d, "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
