"""Numba @njit lane of the hot kernels.

Must stay arithmetically identical (operation-for-operation) to
`_kernels_numpy`; the cross-backend tests assert bit equality.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _fill_first_layer(out, wsum, vsum, vsqsum, n):
    for i in range(1, n + 1):
        dw = wsum[i] - wsum[0]
        ds = vsum[i] - vsum[0]
        dq = vsqsum[i] - vsqsum[0]
        c = dq - ds * ds / dw
        if c < 0.0:
            c = 0.0
        out[i] = c


@njit(cache=True, nogil=True)
def _fill_layer(prev, cur, wsum, vsum, vsqsum, m, n, stack):
    # Divide-and-conquer over the monotone argmin: compute cur[mid] for the
    # midpoint of [lo, hi] scanning candidates [olo, min(ohi, mid-1)], then
    # recurse with the argmin splitting the candidate window.
    top = 0
    stack[top, 0] = m
    stack[top, 1] = n
    stack[top, 2] = m - 1
    stack[top, 3] = n - 1
    top += 1
    while top > 0:
        top -= 1
        lo = stack[top, 0]
        hi = stack[top, 1]
        olo = stack[top, 2]
        ohi = stack[top, 3]
        if lo > hi:
            continue
        mid = (lo + hi) // 2
        tmax = mid - 1
        if ohi < tmax:
            tmax = ohi
        best = np.inf
        bestt = olo
        for t in range(olo, tmax + 1):
            dw = wsum[mid] - wsum[t]
            ds = vsum[mid] - vsum[t]
            dq = vsqsum[mid] - vsqsum[t]
            c = dq - ds * ds / dw
            if c < 0.0:
                c = 0.0
            val = prev[t] + c
            if val < best:
                best = val
                bestt = t
        cur[mid] = best
        stack[top, 0] = mid + 1
        stack[top, 1] = hi
        stack[top, 2] = bestt
        stack[top, 3] = ohi
        top += 1
        stack[top, 0] = lo
        stack[top, 1] = mid - 1
        stack[top, 2] = olo
        stack[top, 3] = bestt
        top += 1


@njit(cache=True, nogil=True)
def _dp_tables(wsum, vsum, vsqsum, k):
    n = wsum.shape[0] - 1
    tables = np.full((k + 1, n + 1), np.inf)
    tables[0, 0] = 0.0
    _fill_first_layer(tables[1], wsum, vsum, vsqsum, n)
    stack = np.empty((256, 4), dtype=np.int64)
    for m in range(2, k + 1):
        _fill_layer(tables[m - 1], tables[m], wsum, vsum, vsqsum, m, n, stack)
    return tables


def dp_tables(wsum, vsum, vsqsum, k):
    """DP cost tables for exact 1D k-means over weighted prefix sums.

    wsum/vsum/vsqsum are length n+1 prefix sums of weights, weighted values
    and weighted squared values.  Returns a (k+1, n+1) float64 array T with
    T[m, i] = minimal within-cluster SSE of the first i values in m
    contiguous clusters (inf where infeasible).
    """
    return _dp_tables(
        np.ascontiguousarray(wsum, dtype=np.float64),
        np.ascontiguousarray(vsum, dtype=np.float64),
        np.ascontiguousarray(vsqsum, dtype=np.float64),
        int(k),
    )


@njit(cache=True, nogil=True)
def _median3x3(a):
    nx, ny = a.shape
    out = np.empty_like(a)
    buf = np.empty(9)
    for i in range(nx):
        for j in range(ny):
            idx = 0
            for di in range(-1, 2):
                ii = i + di
                if ii < 0:
                    ii = 0
                elif ii >= nx:
                    ii = nx - 1
                for dj in range(-1, 2):
                    jj = j + dj
                    if jj < 0:
                        jj = 0
                    elif jj >= ny:
                        jj = ny - 1
                    buf[idx] = a[ii, jj]
                    idx += 1
            for p in range(1, 9):
                key = buf[p]
                q = p - 1
                while q >= 0 and buf[q] > key:
                    buf[q + 1] = buf[q]
                    q -= 1
                buf[q + 1] = key
            out[i, j] = buf[4]
    return out


def median3x3(a):
    """3x3 median of a 2D slice, borders replicated."""
    return _median3x3(np.ascontiguousarray(a, dtype=np.float64))
