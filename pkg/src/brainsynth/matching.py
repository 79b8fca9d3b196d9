"""Cluster label matching as maximum-weight bipartite assignment.

The overlap matrix counts joint-mask voxels per (label-in-A, label-in-B)
pair; matching maximizes total shared voxels over permutations.  The core
solver is scipy's Jonker-Volgenant `linear_sum_assignment`; a certified
greedy pass on top fixes one row at a time to enforce the documented
tie-break (lexicographically smallest permutation among equal-weight
optima).  Counts are integers, so all certification compares exact int64
sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .volume import Mask


@dataclass(frozen=True)
class Assignment:
    perm: np.ndarray  # perm[i] = label in the second clustering matched to i
    weight: int


def overlap_matrix(labels_a: np.ndarray, labels_b: np.ndarray, m: Mask, k: int) -> np.ndarray:
    """counts[i, j] = joint-mask voxels labeled i in A and j in B."""
    if labels_a.shape != m.shape or labels_b.shape != m.shape:
        raise ValueError(
            f"dimension mismatch: labels {labels_a.shape}/{labels_b.shape} vs mask {m.shape}"
        )
    a = labels_a[m].astype(np.int64)
    b = labels_b[m].astype(np.int64)
    if a.size == 0:
        return np.zeros((k, k), dtype=np.int64)
    if a.min() < 0 or a.max() >= k or b.min() < 0 or b.max() >= k:
        raise ValueError(f"labels out of range [0, {k})")
    return np.bincount(a * k + b, minlength=k * k).reshape(k, k)


def _max_assignment_weight(counts: np.ndarray) -> int:
    if counts.size == 0:
        return 0
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return int(counts[rows, cols].sum())


def max_weight_matching(om: np.ndarray) -> Assignment:
    """Maximum-weight perfect matching of an integer k x k overlap matrix.

    Among equal-weight optima, returns the lexicographically smallest
    permutation (perm[0] minimal, then perm[1], ...).
    """
    om = np.asarray(om)
    if om.ndim != 2 or om.shape[0] != om.shape[1] or om.shape[0] < 1:
        raise ValueError(f"overlap matrix must be square and nonempty, got {om.shape}")
    if np.issubdtype(om.dtype, np.floating):
        if not np.isfinite(om).all() or (om != np.rint(om)).any():
            raise ValueError("overlap matrix must be integer-valued")
        om = np.rint(om).astype(np.int64)
    else:
        om = om.astype(np.int64)

    k = om.shape[0]
    perm = np.empty(k, dtype=np.int64)
    free = list(range(k))  # unused columns, ascending
    for i in range(k):
        sub = om[np.ix_(range(i, k), free)]
        rows, cols = linear_sum_assignment(sub, maximize=True)
        total = int(sub[rows, cols].sum())
        j_solver = free[cols[rows == 0][0]]
        # Relaxed completion bound: best assignment of the later rows when
        # every free column (including the one row i takes) is available.
        # A candidate column can only tie the optimum if its own weight plus
        # this bound reaches the optimum, which prunes almost all re-solves.
        relaxed = _max_assignment_weight(om[np.ix_(range(i + 1, k), free)])
        choice = j_solver
        # Any unused column smaller than the solver's pick that still allows
        # an optimal completion wins the tie-break.
        for cand in free:
            if cand >= j_solver:
                break
            if int(om[i, cand]) + relaxed < total:
                continue
            rest = [c for c in free if c != cand]
            tail = _max_assignment_weight(om[np.ix_(range(i + 1, k), rest)])
            if int(om[i, cand]) + tail == total:
                choice = cand
                break
        perm[i] = choice
        free.remove(choice)
    weight = int(om[np.arange(k), perm].sum())
    return Assignment(perm=perm, weight=weight)
