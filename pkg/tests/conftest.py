import numpy as np
import pytest

from rarity_metrics.feature_store import FeatureSet
from rarity_metrics.knn_engine import compiled_available


def make_fs(values, ids=None, tag="test"):
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return FeatureSet.from_array(arr, ids=ids, source_tag=tag)


def gaussian_fs(rng, n, d, loc=0.0, scale=1.0, tag="blob"):
    return make_fs(rng.normal(loc, scale, size=(n, d)).astype(np.float32), tag=tag)


def snapped_gaussian_fs(rng, n, d, loc=0.0, scale=1.0, grid=1024, tag="blob"):
    """Gaussian data snapped to a dyadic grid so that 0.5x and 3x are exact
    in float32 (keeps scale-invariance comparisons free of input rounding)."""
    raw = rng.normal(loc, scale, size=(n, d))
    return make_fs((np.round(raw * grid) / grid).astype(np.float32), tag=tag)


@pytest.fixture
def fs1d():
    """The 1-D hand fixture {0, 1, 3, 7}."""
    return make_fs([0.0, 1.0, 3.0, 7.0])


@pytest.fixture(params=["compiled", "numpy"])
def backend(request, monkeypatch):
    """Run the test under each kernel backend."""
    if request.param == "compiled":
        if not compiled_available():
            pytest.skip("compiled kernels not built")
        monkeypatch.delenv("RARITY_FORCE_FALLBACK", raising=False)
    else:
        monkeypatch.setenv("RARITY_FORCE_FALLBACK", "1")
    return request.param
