"""3D scalar volumes and voxel masks.

A `Volume` is a dense (nx, ny, nz) float64 array indexed [x, y, z] plus
voxel spacing in millimeters.  This is the universal carrier for scans,
synthesized outputs, and segmentation label maps.  Masks are plain boolean
arrays of the same shape.

Volumes are treated as immutable once constructed (the data buffer is
marked read-only); derive new volumes instead of mutating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Mask = np.ndarray  # boolean array, shape == Volume.data.shape


@dataclass(frozen=True)
class Volume:
    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"volume data must be 3D, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"volume dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("volume contains non-finite values")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be 3 positive floats, got {self.spacing}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.data.shape)

    def with_data(self, data: np.ndarray) -> "Volume":
        """New volume with the same spacing and different voxel values."""
        return Volume(data, self.spacing)


def brain_mask(v: Volume) -> Mask:
    """Foreground mask of a skull-stripped scan: every nonzero voxel."""
    return v.data != 0


def joint_mask(a: Volume, b: Volume) -> Mask:
    """Voxels present (nonzero) in both scans."""
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    return (a.data != 0) & (b.data != 0)
