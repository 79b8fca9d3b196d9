"""Pure numpy/scipy lane of the hot kernels.

Arithmetically identical to `_kernels_numba` (same operations in the same
order), so results match that lane bit-for-bit.  Slower on large inputs;
see benchmarks/bench_backends.py.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def dp_tables(wsum, vsum, vsqsum, k):
    """DP cost tables for exact 1D k-means over weighted prefix sums.

    Same contract as the numba lane: returns (k+1, n+1) float64 with
    T[m, i] = minimal SSE of the first i values in m contiguous clusters.
    """
    wsum = np.asarray(wsum, dtype=np.float64)
    vsum = np.asarray(vsum, dtype=np.float64)
    vsqsum = np.asarray(vsqsum, dtype=np.float64)
    k = int(k)
    n = wsum.shape[0] - 1
    tables = np.full((k + 1, n + 1), np.inf)
    tables[0, 0] = 0.0

    dw = wsum[1:] - wsum[0]
    ds = vsum[1:] - vsum[0]
    dq = vsqsum[1:] - vsqsum[0]
    first = dq - ds * ds / dw
    np.maximum(first, 0.0, out=first)
    tables[1, 1:] = first

    for m in range(2, k + 1):
        prev = tables[m - 1]
        cur = tables[m]
        stack = [(m, n, m - 1, n - 1)]
        while stack:
            lo, hi, olo, ohi = stack.pop()
            if lo > hi:
                continue
            mid = (lo + hi) // 2
            tmax = min(mid - 1, ohi)
            sl = slice(olo, tmax + 1)
            dw = wsum[mid] - wsum[sl]
            ds = vsum[mid] - vsum[sl]
            dq = vsqsum[mid] - vsqsum[sl]
            c = dq - ds * ds / dw
            np.maximum(c, 0.0, out=c)
            c += prev[sl]
            j = int(np.argmin(c))
            cur[mid] = c[j]
            bestt = olo + j
            stack.append((mid + 1, hi, bestt, ohi))
            stack.append((lo, mid - 1, olo, bestt))
    return tables


def median3x3(a):
    """3x3 median of a 2D slice, borders replicated."""
    a = np.asarray(a, dtype=np.float64)
    return ndimage.median_filter(a, size=3, mode="nearest")
