#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel lanes.

Times the two hot kernels on realistic sizes (a quantized intensity
histogram for the k-means DP; one axial slice for the median filter) and
verifies both lanes agree bit-for-bit on every workload.

Usage: python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from brainsynth import _kernels_numpy as lane_np

try:
    from brainsynth import _kernels_numba as lane_nb
except ImportError:
    lane_nb = None


def prefixes(n, seed):
    rs = np.random.RandomState(seed)
    vals = np.sort(rs.rand(n))
    w = rs.randint(1, 50, size=n).astype(np.float64)
    return (
        np.concatenate(([0.0], np.cumsum(w))),
        np.concatenate(([0.0], np.cumsum(w * vals))),
        np.concatenate(([0.0], np.cumsum(w * vals * vals))),
    )


def best_of(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads, fewer repeats")
    args = ap.parse_args()

    repeats = 2 if args.quick else 5
    dp_cases = [(2000, 16), (8000, 100)] if args.quick else [(2000, 16), (8000, 100), (30000, 100)]
    slice_shapes = [(240, 240)] if args.quick else [(240, 240), (512, 512)]

    if lane_nb is not None:
        # trigger JIT compilation outside the timed region
        lane_nb.dp_tables(*prefixes(64, 0), 4)
        lane_nb.median3x3(np.zeros((8, 8)))

    rows = []
    for n, k in dp_cases:
        p = prefixes(n, n)
        t_np, out_np = best_of(lambda: lane_np.dp_tables(*p, k), repeats)
        if lane_nb is None:
            rows.append((f"dp_tables n={n} k={k}", t_np, None, True))
            continue
        t_nb, out_nb = best_of(lambda: lane_nb.dp_tables(*p, k), repeats)
        rows.append((f"dp_tables n={n} k={k}", t_np, t_nb, np.array_equal(out_np, out_nb)))

    for shape in slice_shapes:
        sl = np.random.RandomState(1).rand(*shape)
        t_np, out_np = best_of(lambda: lane_np.median3x3(sl), repeats)
        if lane_nb is None:
            rows.append((f"median3x3 {shape[0]}x{shape[1]}", t_np, None, True))
            continue
        t_nb, out_nb = best_of(lambda: lane_nb.median3x3(sl), repeats)
        rows.append((f"median3x3 {shape[0]}x{shape[1]}", t_np, t_nb, np.array_equal(out_np, out_nb)))

    print(f"{'workload':<28}{'numpy':>12}{'numba':>12}{'speedup':>10}  bit-equal")
    for name, t_np, t_nb, equal in rows:
        if t_nb is None:
            print(f"{name:<28}{t_np * 1e3:>10.2f}ms{'n/a':>12}{'n/a':>10}  (numba unavailable)")
        else:
            print(
                f"{name:<28}{t_np * 1e3:>10.2f}ms{t_nb * 1e3:>10.2f}ms{t_np / t_nb:>9.1f}x  {equal}"
            )
    if not all(r[3] for r in rows):
        raise SystemExit("FAIL: lanes disagree")


if __name__ == "__main__":
    main()
