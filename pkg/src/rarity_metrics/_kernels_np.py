"""Pure-NumPy block kernels: the fallback used when the compiled core is absent.

The blocked drivers in :mod:`.knn_engine` feed these kernels one Gram block
``g = q64 @ refs64.T`` at a time.  ``sqdists_block`` turns a Gram block into
squared distances in place; the reduction kernels then consume the converted
block.  The squared distance of an entry is ``s - 2 g`` with
``s = qn[i] + rn[j]``, clamped at zero; entries at or below
``s * DUP_REL_EPS`` are recomputed directly from the float32 rows so exact
duplicate rows come out at exactly zero instead of cancellation noise.

The compiled core in ``_kernels.pyx`` implements the same contract with the
same operation order; keep the two in sync.
"""

import numpy as np

# Relative floor under which the expanded form is recomputed directly.
# Covers worst-case cancellation noise of float64 Gram products up to D ~ 1e4.
DUP_REL_EPS = 1e-11

_CHUNK = 256  # query rows processed per temporary, bounds scratch memory


def _fixup_chunk(d2c, sc, q32c, r32, limit=65536):
    """Recompute near-zero entries of one chunk directly from the rows."""
    mask = d2c <= sc * DUP_REL_EPS
    if not mask.any():
        return
    rows, cols = np.nonzero(mask)
    for a in range(0, rows.size, limit):
        r = rows[a : a + limit]
        c = cols[a : a + limit]
        diff = q32c[r].astype(np.float64) - r32[c].astype(np.float64)
        d2c[r, c] = np.einsum("ij,ij->i", diff, diff)


def sqdists_block(g, qn, rn, q32, r32, workers=1):
    """Overwrite the Gram block with clamped squared distances; returns it."""
    for a in range(0, g.shape[0], _CHUNK):
        b = min(a + _CHUNK, g.shape[0])
        gc = g[a:b]
        s = qn[a:b, None] + rn[None, :]
        np.multiply(gc, -2.0, out=gc)
        gc += s
        np.maximum(gc, 0.0, out=gc)
        _fixup_chunk(gc, s, q32[a:b], r32)
    return g


def smallest_block(d2, m, self_base, workers=1):
    """Per row of a converted block, the m smallest values in ascending order.

    ``self_base`` is the reference index of the block's first row when the
    queries are the reference set itself (the own entry is excluded), or -1
    for cross-set queries.  May overwrite excluded entries of ``d2``.
    """
    rows, n = d2.shape
    if self_base >= 0:
        d2[np.arange(rows), self_base + np.arange(rows)] = np.inf
    if m < n:
        out = np.partition(d2, m - 1, axis=1)[:, :m].copy()
    else:
        out = d2.copy()
    out.sort(axis=1)
    return out


def score_block(d2, radii2, want_realism, workers=1):
    """Membership reductions of one converted block against K radius columns.

    Returns (argmin, counts, realism2): per row and radius column, the lowest
    reference index whose sphere both contains the row and has the smallest
    radius (-1 if none), the number of containing spheres, and -- when
    requested -- the maximum of radius^2/d^2 over column 0 (inf at d=0).
    """
    rows, n = d2.shape
    kcols = radii2.shape[1]
    argmin = np.full((rows, kcols), -1, dtype=np.int64)
    counts = np.zeros((rows, kcols), dtype=np.int64)
    realism2 = np.zeros(rows, dtype=np.float64) if want_realism else None
    for a in range(0, rows, _CHUNK):
        b = min(a + _CHUNK, rows)
        d2c = d2[a:b]
        for t in range(kcols):
            r2 = radii2[:, t]
            inside = d2c <= r2[None, :]
            counts[a:b, t] = inside.sum(axis=1)
            w = np.where(inside, np.broadcast_to(r2, d2c.shape), np.inf)
            j = np.argmin(w, axis=1)
            hit = w[np.arange(b - a), j] != np.inf
            argmin[a:b, t] = np.where(hit, j, -1)
        if want_realism:
            r2 = radii2[:, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(d2c == 0.0, np.inf, r2[None, :] / np.where(d2c == 0.0, 1.0, d2c))
            realism2[a:b] = ratio.max(axis=1)
    return argmin, counts, realism2


def colmin_block(d2, workers=1):
    """Per reference column, the minimum value over the block's rows."""
    return d2.min(axis=0)
