import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from brainsynth.volume import Volume


@pytest.fixture
def small_volume():
    data = np.arange(24, dtype=np.float64).reshape(2, 3, 4)
    return Volume(data, spacing=(1.0, 1.5, 2.0))


def make_volume(values, dims=None, spacing=(1.0, 1.0, 1.0)):
    arr = np.asarray(values, dtype=np.float64)
    if dims is not None:
        arr = arr.reshape(dims)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1, 1)
    return Volume(arr, spacing)
