"""Blocked exact L2 distance computation, per-sample k-NN radii and
sphere-membership sweeps.

All distances are computed per query-row block via the expansion
``|q|^2 + |r|^2 - 2 q.r``; the Gram product runs in float64 BLAS against a
pre-transposed reference matrix, and the per-block reductions run in the
compiled core (``rarity_metrics._kernels``) when it is importable, otherwise
in the NumPy fallback (``rarity_metrics._kernels_np``).  Setting the
environment variable ``RARITY_FORCE_FALLBACK=1`` forces the fallback.

Entries are compared as squared quantities throughout; square roots are taken
only where radii or scores leave this module.  Row blocks are independent, so
results are identical for any block size and worker count.
"""

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_np, npyio
from .feature_store import FeatureSet

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - build-environment dependent
    _compiled = None

# Largest per-row selection the compiled streaming kernel handles; wider
# requests fall back to the partition-based kernel.
MAX_TOPM = 64
MAX_KCOLS = 64

_CHUNK = 256


def compiled_available():
    return _compiled is not None


def active_backend():
    """Name of the kernel backend the engine will use: 'compiled' or 'numpy'."""
    if _compiled is None or os.environ.get("RARITY_FORCE_FALLBACK"):
        return "numpy"
    return "compiled"


def _impl():
    return _compiled if active_backend() == "compiled" else _kernels_np


@dataclass(frozen=True)
class DistanceConfig:
    """Blocking, memory-budget and worker configuration for distance sweeps."""

    metric: str = "l2"
    block_rows: int = 0  # 0 derives the block size from the memory budget
    memory_budget_bytes: int = 1 << 30
    workers: int = 0  # 0 uses all logical processors

    def __post_init__(self):
        if self.metric != "l2":
            raise ValueError("only the L2 metric is supported, got %r" % self.metric)
        if self.block_rows < 0:
            raise ValueError("block_rows must be positive (or 0 for automatic)")
        if self.memory_budget_bytes < 1:
            raise ValueError("memory_budget_bytes must be positive")
        if self.workers < 0:
            raise ValueError("workers must be positive (or 0 for all processors)")

    def resolved_workers(self):
        return self.workers if self.workers else (os.cpu_count() or 1)

    def resolved_block_rows(self, n_refs, n_queries):
        if self.block_rows:
            if self.block_rows * n_refs * 8 > self.memory_budget_bytes:
                raise ValueError(
                    "block_rows=%d needs %d bytes per distance block, over the %d budget"
                    % (self.block_rows, self.block_rows * n_refs * 8, self.memory_budget_bytes)
                )
            return min(self.block_rows, n_queries)
        # two float64 blocks (distance block + one scratch copy) within budget
        rows = self.memory_budget_bytes // (16 * n_refs)
        return max(1, min(n_queries, int(rows)))


@dataclass(frozen=True)
class ManifoldIndex:
    """A reference feature set plus its per-sample k-NN radii."""

    features: FeatureSet
    k: int
    radii: np.ndarray  # float32, length N

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        radii = np.ascontiguousarray(self.radii, dtype=np.float32)
        if radii.shape != (self.features.n,):
            raise ValueError("radii length %d != N=%d" % (radii.shape[0], self.features.n))
        if (radii < 0).any():
            raise ValueError("radii must be non-negative")
        radii.setflags(write=False)
        object.__setattr__(self, "radii", radii)

    @property
    def n(self):
        return self.features.n

    @property
    def dim(self):
        return self.features.dim

    def radii_sq64(self):
        r = self.radii.astype(np.float64)
        return r * r


@dataclass(frozen=True)
class MembershipResult:
    inside: bool
    containing: tuple  # (reference index, radius) pairs, index ascending


def _as_matrix(x, name):
    if isinstance(x, FeatureSet):
        return x.data
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError("%s must be a 2-D matrix, got %d-D" % (name, arr.ndim))
    if not np.isfinite(arr).all():
        raise ValueError("%s contains non-finite values" % name)
    return arr


def _norms64(x32):
    """Per-row squared norms in float64, computed chunkwise (row-independent)."""
    out = np.empty(x32.shape[0], dtype=np.float64)
    for a in range(0, x32.shape[0], _CHUNK):
        c = x32[a : a + _CHUNK].astype(np.float64)
        out[a : a + _CHUNK] = np.einsum("ij,ij->i", c, c)
    return out


def _prepare_refs(r32):
    """Transposed float64 copy of the references plus their squared norms.

    The (D, N) C-order layout keeps the per-block Gram product on the fast
    GEMM path.
    """
    n, d = r32.shape
    refs_t = np.empty((d, n), dtype=np.float64)
    for a in range(0, n, _CHUNK):
        b = min(a + _CHUNK, n)
        refs_t[:, a:b] = r32[a:b].astype(np.float64).T
    return refs_t, _norms64(r32)


def _iter_d2_blocks(q32, r32, cfg, impl, *, refs_prepared=None, qn=None):
    """Yield (start, d2_block) for consecutive query row blocks.

    The yielded block is a view into one reused buffer: consumers must
    finish reducing it before advancing the iterator (all drivers do).
    """
    refs_t, rn = refs_prepared if refs_prepared is not None else _prepare_refs(r32)
    if qn is None:
        qn = rn if q32 is r32 else _norms64(q32)
    block = cfg.resolved_block_rows(r32.shape[0], q32.shape[0])
    workers = cfg.resolved_workers()
    buf = np.empty((block, r32.shape[0]), dtype=np.float64)
    for a in range(0, q32.shape[0], block):
        b = min(a + block, q32.shape[0])
        g = buf[: b - a]
        np.matmul(q32[a:b].astype(np.float64), refs_t, out=g)
        yield a, impl.sqdists_block(g, qn[a:b], rn, q32[a:b], r32, workers)


def pairwise_sq_dists(queries, refs, cfg=None):
    """Full M x N matrix of squared L2 distances (float64, clamped at zero)."""
    cfg = cfg or DistanceConfig()
    q32 = _as_matrix(queries, "queries")
    r32 = _as_matrix(refs, "refs")
    if q32.shape[1] != r32.shape[1]:
        raise ValueError("dimension mismatch: queries D=%d, refs D=%d" % (q32.shape[1], r32.shape[1]))
    out = np.empty((q32.shape[0], r32.shape[0]), dtype=np.float64)
    for a, d2 in _iter_d2_blocks(q32, r32, cfg, _impl()):
        out[a : a + d2.shape[0]] = d2
    return out


def _topm_self_sqdists(r32, m, cfg):
    """(N, m) matrix of each row's m smallest squared distances to other rows."""
    impl = _impl()
    select = impl if m <= MAX_TOPM else _kernels_np
    workers = cfg.resolved_workers()
    out = np.empty((r32.shape[0], m), dtype=np.float64)
    for a, d2 in _iter_d2_blocks(r32, r32, cfg, impl):
        out[a : a + d2.shape[0]] = select.smallest_block(d2, m, a, workers)
    return out


def knn_radii_upto(refs, k_max, cfg=None):
    """Radii for every k in 1..k_max at once, as a float32 (N, k_max) matrix.

    Column k-1 holds the distance to the k-th nearest other row; columns are
    non-decreasing left to right.
    """
    cfg = cfg or DistanceConfig()
    if not isinstance(refs, FeatureSet):
        refs = FeatureSet.from_array(refs)
    if not 1 <= k_max <= refs.n - 1:
        raise ValueError("k_max must satisfy 1 <= k_max <= N-1 (N=%d, k_max=%d)" % (refs.n, k_max))
    top = _topm_self_sqdists(refs.data, k_max, cfg)
    return np.sqrt(top).astype(np.float32)


def knn_radii(refs, k, cfg=None):
    """ManifoldIndex with each sample's distance to its k-th nearest other row.

    The sample itself is excluded, so duplicated rows produce radius 0 and
    k must be at most N-1.  Selection is a per-row partial order statistic;
    the full distance matrix is never materialized.
    """
    cfg = cfg or DistanceConfig()
    if not isinstance(refs, FeatureSet):
        raise TypeError("refs must be a FeatureSet")
    if not 1 <= k <= refs.n - 1:
        raise ValueError("k must satisfy 1 <= k <= N-1 (N=%d, k=%d)" % (refs.n, k))
    top = _topm_self_sqdists(refs.data, k, cfg)
    radii = np.sqrt(top[:, k - 1]).astype(np.float32)
    return ManifoldIndex(features=refs, k=k, radii=radii)


def nnd(refs, cfg=None):
    """Per-sample nearest-neighbor distance; identical to k-NN radii at k=1."""
    if not isinstance(refs, FeatureSet):
        refs = FeatureSet.from_array(refs)
    if refs.n < 2:
        raise ValueError("nearest-neighbor distances need at least 2 samples")
    return knn_radii(refs, 1, cfg).radii


def membership(query, index, cfg=None):
    """All reference spheres containing the query point (boundary inclusive).

    Comparisons run on squared quantities; reported radii are un-squared.
    """
    q = np.ascontiguousarray(query, dtype=np.float32).reshape(-1)
    if q.shape[0] != index.dim:
        raise ValueError("query dimension %d != index dimension %d" % (q.shape[0], index.dim))
    d2 = pairwise_sq_dists(q.reshape(1, -1), index.features.data, cfg)[0]
    hits = np.nonzero(d2 <= index.radii_sq64())[0]
    containing = tuple((int(i), float(index.radii[i])) for i in hits)
    return MembershipResult(inside=bool(containing), containing=containing)


def score_sweep(refs, radii, queries, cfg=None, want_realism=False, want_colmin=False):
    """Blocked membership sweep of query rows against reference spheres.

    ``radii`` is a float32 vector (N,) or matrix (N, K), one column per
    sphere-radius assignment.  Returns ``(argmin, counts, realism2, colmin)``:

    * argmin (M, K) int64 — per query and column, the reference index of the
      smallest containing sphere (ties to the lowest index), -1 if none;
    * counts (M, K) int64 — number of containing spheres;
    * realism2 (M,) float64 — max over references of radius^2/d^2 for radii
      column 0, inf at d=0 (only when ``want_realism``);
    * colmin (N,) float64 — per reference, the minimum squared distance to
      any query (only when ``want_colmin``).
    """
    cfg = cfg or DistanceConfig()
    q32 = _as_matrix(queries, "queries")
    r32 = _as_matrix(refs, "refs")
    if q32.shape[1] != r32.shape[1]:
        raise ValueError("dimension mismatch: queries D=%d, refs D=%d" % (q32.shape[1], r32.shape[1]))
    radii64 = np.ascontiguousarray(radii, dtype=np.float32).astype(np.float64)
    if radii64.ndim == 1:
        radii64 = radii64[:, None]
    if radii64.shape[0] != r32.shape[0]:
        raise ValueError("radii rows %d != refs N=%d" % (radii64.shape[0], r32.shape[0]))
    if radii64.shape[1] > MAX_KCOLS:
        raise ValueError("at most %d radius columns per sweep" % MAX_KCOLS)
    radii2 = np.ascontiguousarray(radii64 * radii64)
    impl = _impl()
    workers = cfg.resolved_workers()
    m = q32.shape[0]
    argmin = np.empty((m, radii2.shape[1]), dtype=np.int64)
    counts = np.empty((m, radii2.shape[1]), dtype=np.int64)
    realism2 = np.empty(m, dtype=np.float64) if want_realism else None
    colmin = np.full(r32.shape[0], np.inf, dtype=np.float64) if want_colmin else None
    for a, d2 in _iter_d2_blocks(q32, r32, cfg, impl):
        b = a + d2.shape[0]
        if want_colmin:
            np.minimum(colmin, impl.colmin_block(d2, workers), out=colmin)
        am, ct, re = impl.score_block(d2, radii2, want_realism, workers)
        argmin[a:b] = am
        counts[a:b] = ct
        if want_realism:
            realism2[a:b] = re
    return argmin, counts, realism2, colmin


# --- radii cache -----------------------------------------------------------

def radii_cache_paths(feature_path, k):
    base = str(feature_path)
    return base + ".radii.k%d.npy" % k, base + ".radii.k%d.json" % k


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_radii_cache(feature_path, index):
    """Store an index's radii beside its feature file, keyed by content hash."""
    npy_path, meta_path = radii_cache_paths(feature_path, index.k)
    npyio.write_array(npy_path, index.radii)
    meta = {"content_sha256": file_sha256(feature_path), "k": index.k, "n": int(index.n)}
    with open(meta_path, "w", encoding="utf-8") as f:
        json.dump(meta, f, sort_keys=True)
        f.write("\n")


def load_radii_cache(feature_path, k):
    """Cached radii for a feature file, or None if absent or stale."""
    npy_path, meta_path = radii_cache_paths(feature_path, k)
    if not (os.path.exists(npy_path) and os.path.exists(meta_path)):
        return None
    try:
        with open(meta_path, encoding="utf-8") as f:
            meta = json.load(f)
        radii = npyio.read_array(npy_path, ndim=1)
    except (ValueError, OSError):
        return None
    if meta.get("k") != k or meta.get("n") != radii.shape[0]:
        return None
    if meta.get("content_sha256") != file_sha256(feature_path):
        return None
    return radii
