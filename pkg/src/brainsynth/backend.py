"""Kernel backend selection.

The hot numeric kernels (exact 1D k-means DP layers, 3x3 median filter)
ship in two interchangeable implementations: a numba @njit lane (default)
and a pure numpy/scipy lane.  Set the environment variable

    BRAINSYNTH_NO_NUMBA=1

before importing the package to force the numpy lane; it is also used
automatically when numba is unavailable.  Both lanes produce bit-identical
results; `benchmarks/bench_backends.py` compares their speed.
"""

from __future__ import annotations

import os

ENV_FLAG = "BRAINSYNTH_NO_NUMBA"


def _numpy_forced() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes")


def _load():
    if not _numpy_forced():
        try:
            from . import _kernels_numba as impl

            return impl, "numba"
        except ImportError:
            pass
    from . import _kernels_numpy as impl

    return impl, "numpy"


_impl, BACKEND = _load()

dp_tables = _impl.dp_tables
median3x3 = _impl.median3x3


def active_backend() -> str:
    """Name of the kernel lane in use: 'numba' or 'numpy'."""
    return BACKEND
