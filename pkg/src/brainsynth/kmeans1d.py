"""Exact (globally optimal) one-dimensional k-means on weighted values.

Whole volumes are clustered through their intensity histograms: distinct
values with integer multiplicities.  The optimal partition into k
contiguous intervals (minimizing weighted within-cluster SSE) is found by
dynamic programming; DP layers are filled by divide-and-conquer over the
monotone argmin structure (O(k n log n)), and the boundary vector is
reconstructed greedily from the backward table so that, among equal-cost
optima, the lexicographically smallest boundary vector is returned.

Cluster indices are assigned in ascending order of cluster mean, which for
sorted values is the natural interval order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .volume import Mask, Volume

# Normalized intensities are quantized to this grid before clustering and
# before mapping-table key comparison; 2**16 - 1 intervals over [0, 1].
GRID_BINS = 65535

BACKGROUND_LABEL = -1


@dataclass(frozen=True)
class WeightedValues:
    """Strictly increasing distinct values with positive integer weights."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.int64)
        if values.ndim != 1 or weights.ndim != 1 or values.size != weights.size:
            raise ValueError("values and weights must be 1D and equally long")
        if values.size and not (np.diff(values) > 0).all():
            raise ValueError("values must be strictly increasing")
        if (weights < 1).any():
            raise ValueError("weights must be >= 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return int(self.values.size)

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "WeightedValues":
        values, counts = np.unique(np.asarray(samples, dtype=np.float64), return_counts=True)
        return cls(values, counts)


@dataclass(frozen=True)
class Clustering:
    """Optimal contiguous partition of sorted distinct values.

    boundaries[j] is the index (into `values`) of the first value of
    cluster j+1; cluster j covers values[boundaries[j-1]:boundaries[j]].
    """

    k: int
    requested_k: int
    boundaries: np.ndarray  # int64, length k-1
    means: np.ndarray  # float64, length k, strictly increasing
    cost: float
    values: np.ndarray  # the sorted distinct values that were clustered


def quantize(x: np.ndarray) -> np.ndarray:
    """Map intensities in [0, 1] to integer grid bins 0..GRID_BINS."""
    bins = np.rint(np.asarray(x, dtype=np.float64) * GRID_BINS)
    return np.clip(bins, 0, GRID_BINS).astype(np.int64)


def intensity_histogram(v: Volume, m: Mask) -> WeightedValues:
    """Quantized in-mask intensity histogram of a normalized volume."""
    bins = quantize(v.data[m])
    counts = np.bincount(bins, minlength=GRID_BINS + 1)
    present = np.nonzero(counts)[0]
    return WeightedValues(present / GRID_BINS, counts[present])


def _prefix_sums(values, weights):
    w = weights.astype(np.float64)
    wsum = np.zeros(len(values) + 1)
    vsum = np.zeros(len(values) + 1)
    vsqsum = np.zeros(len(values) + 1)
    np.cumsum(w, out=wsum[1:])
    np.cumsum(w * values, out=vsum[1:])
    np.cumsum(w * values * values, out=vsqsum[1:])
    return wsum, vsum, vsqsum


def _interval_costs(wsum, vsum, vsqsum, starts, ends):
    dw = wsum[ends] - wsum[starts]
    ds = vsum[ends] - vsum[starts]
    dq = vsqsum[ends] - vsqsum[starts]
    c = dq - ds * ds / dw
    return np.maximum(c, 0.0)


def _greedy_boundaries(rev_tables, wsum, vsum, vsqsum, k):
    """Lexicographically smallest optimal boundary vector.

    rev_tables[m, j] holds the optimal cost of the *last* j values in m
    clusters; scanning candidate ends left to right with a strict argmin
    therefore minimizes the first boundary first, then the second, etc.
    """
    n = len(wsum) - 1
    bounds = np.empty(k - 1, dtype=np.int64)
    pos = 0
    for step in range(k - 1):
        rem = k - step - 1  # clusters still to place after the current one
        lo, hi = pos + 1, n - rem
        ends = np.arange(lo, hi + 1)
        head = _interval_costs(wsum, vsum, vsqsum, pos, ends)
        tail = rev_tables[rem, n - hi : n - lo + 1][::-1]
        pos = lo + int(np.argmin(head + tail))
        bounds[step] = pos
    return bounds


def cluster_1d(wv: WeightedValues, k: int) -> Clustering:
    """Globally optimal weighted 1D k-means into k contiguous clusters.

    k larger than the number of distinct values is silently clamped; the
    effective k is recorded on the result.  Among equal-cost optima the
    lexicographically smallest boundary vector wins.
    """
    n = len(wv)
    if n == 0:
        raise ValueError("cannot cluster an empty value set")
    if k < 1:
        raise ValueError("k must be >= 1")
    k_eff = min(k, n)

    wsum, vsum, vsqsum = _prefix_sums(wv.values, wv.weights)
    if k_eff == 1:
        boundaries = np.empty(0, dtype=np.int64)
    else:
        rw, rs, rq = _prefix_sums(wv.values[::-1], wv.weights[::-1])
        rev_tables = backend.dp_tables(rw, rs, rq, k_eff)
        boundaries = _greedy_boundaries(rev_tables, wsum, vsum, vsqsum, k_eff)

    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [n]))
    means = (vsum[ends] - vsum[starts]) / (wsum[ends] - wsum[starts])
    # fsum: the reported cost is the exactly-rounded sum of interval costs,
    # independent of accumulation order.
    cost = math.fsum(_interval_costs(wsum, vsum, vsqsum, starts, ends))
    return Clustering(
        k=k_eff,
        requested_k=int(k),
        boundaries=boundaries,
        means=means,
        cost=cost,
        values=wv.values,
    )


def assign_labels(v: Volume, m: Mask, c: Clustering) -> np.ndarray:
    """Materialize cluster labels over voxels.

    Expects `c` to come from `cluster_1d(intensity_histogram(v, m), k)`:
    in-mask voxel values are quantized on the shared grid and must fall in
    the clustered value range.  Out-of-mask voxels get BACKGROUND_LABEL.
    """
    labels = np.full(v.dims, BACKGROUND_LABEL, dtype=np.int32)
    vals = quantize(v.data[m]) / GRID_BINS
    if vals.size == 0:
        return labels
    if vals.min() < c.values[0] or vals.max() > c.values[-1]:
        raise RuntimeError("voxel value outside the clustered range; clustering does not match volume")
    idx = np.searchsorted(c.values, vals, side="left")
    labels[m] = np.searchsorted(c.boundaries, idx, side="right").astype(np.int32)
    return labels
