"""Intensity normalization, the two reference baselines, and median postfilter.

All functions are pure: they take volumes/masks and return new volumes.
Masks must be derived from the *raw* volume (nonzero voxels) before
normalization, since normalization maps the in-mask minimum to 0.
"""

from __future__ import annotations

import numpy as np

from . import backend
from .rng import random_uniform
from .volume import Mask, Volume, brain_mask


def normalize(v: Volume, m: Mask) -> Volume:
    """Min-max rescale the in-mask values to [0, 1]; outside the mask -> 0.

    A constant in-mask image maps to all zeros instead of erroring, so
    degenerate inputs cannot abort batch runs.
    """
    out = np.zeros_like(v.data)
    vals = v.data[m]
    if vals.size:
        lo = vals.min()
        hi = vals.max()
        if hi > lo:
            out[m] = (vals - lo) / (hi - lo)
    return v.with_data(out)


def complement(v: Volume) -> Volume:
    """Intensity inversion baseline: p -> min(v) + max(v) - p.

    min/max range over all voxels (background included); background voxels
    are reset to 0 afterwards so the output stays skull-stripped.
    """
    lo = v.data.min()
    hi = v.data.max()
    out = (lo + hi) - v.data
    out[~brain_mask(v)] = 0.0
    return v.with_data(out)


def random_fill(v: Volume, seed: int) -> Volume:
    """Random baseline: uniform [0, 1) samples on every nonzero voxel."""
    m = brain_mask(v)
    out = np.zeros_like(v.data)
    out[m] = random_uniform(seed, int(m.sum()))
    return v.with_data(out)


def median_filter_3x3(v: Volume, m: Mask) -> Volume:
    """Slice-wise 3x3 median filter restricted to in-mask voxels.

    Each axial (constant-z) slice is filtered with a 3x3 window (borders
    replicated, background values participate in the window); only in-mask
    voxels receive the filtered value.
    """
    out = np.array(v.data)
    for z in range(v.dims[2]):
        sl = v.data[:, :, z]
        mz = m[:, :, z]
        if not mz.any():
            continue
        filt = backend.median3x3(sl)
        out[:, :, z] = np.where(mz, filt, sl)
    return v.with_data(out)
