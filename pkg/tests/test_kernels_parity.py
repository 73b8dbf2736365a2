"""Block-level agreement between the compiled kernels and the NumPy fallback."""

import numpy as np
import pytest

from rarity_metrics import _kernels_np
from rarity_metrics.knn_engine import compiled_available, knn_radii

import oracles
from conftest import make_fs

compiled = pytest.importorskip("rarity_metrics._kernels") if compiled_available() else None

pytestmark = pytest.mark.skipif(not compiled_available(), reason="compiled kernels not built")


def _gram_inputs(rng, rows, n, d, duplicates=0):
    q32 = rng.normal(size=(rows, d)).astype(np.float32)
    r32 = rng.normal(size=(n, d)).astype(np.float32)
    for i in range(duplicates):
        r32[n - 1 - i] = q32[i % rows]
    qn = np.einsum("ij,ij->i", q32.astype(np.float64), q32.astype(np.float64))
    rn = np.einsum("ij,ij->i", r32.astype(np.float64), r32.astype(np.float64))
    g = q32.astype(np.float64) @ r32.astype(np.float64).T
    return g, qn, rn, q32, r32


def test_sqdists_block_bitwise_parity():
    rng = np.random.default_rng(60)
    g, qn, rn, q32, r32 = _gram_inputs(rng, 13, 29, 5, duplicates=4)
    a = compiled.sqdists_block(g.copy(), qn, rn, q32, r32, 2)
    b = _kernels_np.sqdists_block(g.copy(), qn, rn, q32, r32, 2)
    assert np.array_equal(a, b)


def test_sqdists_exact_zero_for_duplicates():
    rng = np.random.default_rng(61)
    g, qn, rn, q32, r32 = _gram_inputs(rng, 6, 20, 8, duplicates=6)
    d2 = compiled.sqdists_block(g.copy(), qn, rn, q32, r32, 1)
    for i in range(6):
        j = 20 - 1 - i
        assert d2[i % 6, j] == 0.0


def test_smallest_block_matches_sorted_prefix():
    rng = np.random.default_rng(62)
    g, qn, rn, q32, r32 = _gram_inputs(rng, 11, 37, 4)
    d2 = _kernels_np.sqdists_block(g.copy(), qn, rn, q32, r32, 1)
    want = np.sort(d2, axis=1)[:, :5]
    got = compiled.smallest_block(d2.copy(), 5, -1, 3)
    assert np.array_equal(got, want)
    got_np = _kernels_np.smallest_block(d2.copy(), 5, -1, 3)
    assert np.array_equal(got_np, want)


def test_smallest_block_self_exclusion():
    rng = np.random.default_rng(63)
    x = rng.normal(size=(15, 3)).astype(np.float32)
    qn = np.einsum("ij,ij->i", x.astype(np.float64), x.astype(np.float64))
    g = x.astype(np.float64) @ x.astype(np.float64).T
    d2 = _kernels_np.sqdists_block(g.copy(), qn, qn, x, x, 1)
    got = compiled.smallest_block(d2.copy(), 1, 0, 2)
    masked = d2.copy()
    np.fill_diagonal(masked, np.inf)
    assert np.array_equal(got[:, 0], masked.min(axis=1))


def test_smallest_block_rejects_wide_selection():
    d2 = np.zeros((2, 100))
    with pytest.raises(ValueError):
        compiled.smallest_block(d2, 65, -1, 1)


def test_wide_k_uses_fallback_selection():
    # driver must route k > 64 through the partition kernel even when compiled
    rng = np.random.default_rng(64)
    fs = make_fs(rng.normal(size=(100, 3)).astype(np.float32))
    got = knn_radii(fs, 70).radii
    want = oracles.knn_radii(fs.data, 70)
    assert np.allclose(got, want, rtol=1e-9, atol=0)


def test_score_block_parity_and_tie_break():
    rng = np.random.default_rng(65)
    g, qn, rn, q32, r32 = _gram_inputs(rng, 9, 21, 3, duplicates=2)
    d2 = _kernels_np.sqdists_block(g.copy(), qn, rn, q32, r32, 1)
    radii2 = np.ascontiguousarray(
        np.square(np.abs(rng.normal(size=(21, 4)))).astype(np.float64)
    )
    radii2[:, 1] = radii2[0, 1]  # a fully tied column: lowest index must win
    for want_realism in (False, True):
        a = compiled.score_block(d2.copy(), radii2, want_realism, 2)
        b = _kernels_np.score_block(d2.copy(), radii2, want_realism, 2)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])
        if want_realism:
            assert np.array_equal(a[2], b[2])
    am, _, _ = compiled.score_block(d2.copy(), radii2, False, 1)
    tied = radii2[:, 1]
    for i in range(9):
        inside = np.nonzero(d2[i] <= tied)[0]
        assert am[i, 1] == (inside[0] if inside.size else -1)


def test_colmin_block_parity():
    rng = np.random.default_rng(66)
    g, qn, rn, q32, r32 = _gram_inputs(rng, 17, 4999, 2)
    d2 = _kernels_np.sqdists_block(g.copy(), qn, rn, q32, r32, 1)
    a = compiled.colmin_block(d2.copy(), 3)
    b = _kernels_np.colmin_block(d2.copy(), 3)
    assert np.array_equal(a, b)
    assert np.array_equal(a, d2.min(axis=0))
