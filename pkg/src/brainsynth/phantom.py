"""Synthetic scan pairs with a known per-tissue intensity transfer.

Phantoms are the desk-scale ground truth: an ellipsoidal "head" is split
into nested tissue shells by thresholding a perturbed radial field (the
perturbation is weak and low-frequency, so interfaces stay smooth at voxel
scale and the slice-wise median postfilter barely touches them).  Tissue i
gets T1 intensities in the disjoint band [(i+0.25)/T, (i+0.75)/T], shaded
by a smooth field that spans the band exactly.  The T2 counterpart applies
a per-tissue affine map (plus optional Gaussian noise), so the transfer a
pipeline must recover is known in closed form and stable across phantoms
of the same family.
"""

from __future__ import annotations

import numpy as np

from .pipeline import PatientPair
from .rng import derive_seed, random_normal, random_uniform
from .volume import Volume

_REGION_STREAM = 0x52_45_47
_SHADE_STREAM = 0x53_48_41
_NOISE_STREAM = 0x4E_4F_49


def _cosine_field(dims, seed, n_waves, freq_lo, freq_hi):
    nx, ny, nz = dims
    x = np.linspace(0.0, 1.0, nx).reshape(-1, 1, 1)
    y = np.linspace(0.0, 1.0, ny).reshape(1, -1, 1)
    z = np.linspace(0.0, 1.0, nz).reshape(1, 1, -1)
    u = random_uniform(seed, 5 * n_waves)
    field = np.zeros(dims)
    for w in range(n_waves):
        amp = 0.5 + 0.5 * u[5 * w]
        fx, fy, fz = freq_lo + (freq_hi - freq_lo) * u[5 * w + 1 : 5 * w + 4]
        phase = 2.0 * np.pi * u[5 * w + 4]
        field += amp * np.cos(2.0 * np.pi * (fx * x + fy * y + fz * z) + phase)
    return field


def default_transfer(tissue_count: int) -> list[tuple[float, float]]:
    """Per-tissue affine coefficients of the reference phantom family.

    Tissue i (ascending T1 band) maps onto the reversed band slot with a
    negative, tissue-dependent slope; target centers are scattered inside
    their slots so the family is roughly complementary overall but no
    single global complement reproduces it.
    """
    slopes = (0.6, 0.75, 0.55, 0.7, 0.65, 0.5)
    jitter = (0.22, -0.2, 0.13, -0.24, 0.18, -0.15)
    out = []
    for i in range(tissue_count):
        lo = (i + 0.25) / tissue_count
        hi = (i + 0.75) / tissue_count
        a = -slopes[i % len(slopes)]
        center = (tissue_count - 1 - i + 0.5 + jitter[i % len(jitter)]) / tissue_count
        b = center - a * (lo + hi) / 2.0
        out.append((a, b))
    return out


def make_phantom_pair(
    seed: int,
    dims: tuple[int, int, int] = (64, 64, 64),
    tissue_count: int = 4,
    transfer: list[tuple[float, float]] | None = None,
    noise_sd: float = 0.0,
    pair_id: str | None = None,
) -> PatientPair:
    """Deterministic phantom pair (T1, T2) for a given seed."""
    if not 2 <= tissue_count <= 6:
        raise ValueError(f"tissue_count must be in [2, 6], got {tissue_count}")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    if transfer is None:
        transfer = default_transfer(tissue_count)
    if len(transfer) != tissue_count:
        raise ValueError(f"need {tissue_count} (slope, offset) pairs, got {len(transfer)}")

    bands = [((i + 0.25) / tissue_count, (i + 0.75) / tissue_count) for i in range(tissue_count)]
    for (a, b), (lo, hi) in zip(transfer, bands):
        if not (np.isfinite(a) and np.isfinite(b)):
            raise ValueError(f"non-finite transfer coefficients ({a}, {b})")
        img = sorted((a * lo + b, a * hi + b))
        if img[0] < 0.0 or img[1] > 1.0:
            raise ValueError(
                f"transfer ({a}, {b}) maps band [{lo:.3f}, {hi:.3f}] outside [0, 1]"
            )

    nx, ny, nz = dims
    gx = np.linspace(-1.0, 1.0, nx).reshape(-1, 1, 1)
    gy = np.linspace(-1.0, 1.0, ny).reshape(1, -1, 1)
    gz = np.linspace(-1.0, 1.0, nz).reshape(1, 1, -1)
    radius = np.sqrt((gx / 0.84) ** 2 + (gy / 0.84) ** 2 + (gz / 0.84) ** 2)
    head = radius <= 1.0

    # Radial field plus a weak low-frequency wobble: the gradient stays
    # dominated by the radial term, so quantile level sets are smooth
    # nested shells rather than voxel-scale speckle.
    wobble = _cosine_field(dims, derive_seed(seed, _REGION_STREAM), 3, 0.15, 0.4)
    region_field = radius + 0.06 * wobble
    inside = region_field[head]
    thresholds = np.quantile(inside, np.arange(1, tissue_count) / tissue_count)
    tissue = np.searchsorted(thresholds, inside, side="right")

    shade_field = _cosine_field(dims, derive_seed(seed, _SHADE_STREAM), 4, 0.8, 2.4)[head]
    t1_in = np.empty_like(inside)
    t2_in = np.empty_like(inside)
    for i, ((lo, hi), (a, b)) in enumerate(zip(bands, transfer)):
        sel = tissue == i
        if not sel.any():
            raise RuntimeError(f"tissue {i} received no voxels; widen dims or reseed")
        s = shade_field[sel]
        smin, smax = s.min(), s.max()
        s = (s - smin) / (smax - smin) if smax > smin else np.full_like(s, 0.5)
        t1_in[sel] = lo + (hi - lo) * s
        t2_in[sel] = a * t1_in[sel] + b
    if noise_sd > 0:
        noise = random_normal(derive_seed(seed, _NOISE_STREAM), t2_in.size)
        t2_in = np.clip(t2_in + noise_sd * noise, 0.0, 1.0)

    t1 = np.zeros(dims)
    t2 = np.zeros(dims)
    t1[head] = t1_in
    t2[head] = t2_in
    if pair_id is None:
        pair_id = f"phantom{seed:08d}"
    return PatientPair(id=pair_id, t1=Volume(t1), t2=Volume(t2))
