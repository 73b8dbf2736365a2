# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, language_level=3
"""Compiled block kernels: the hot per-row reductions of the distance sweeps.

Mirrors the contract and operation order of ``_kernels_np`` (see that module
for the semantics); keep the two in sync.  Rows are processed in parallel
with OpenMP; every output element depends on exactly one row (or one column
tile), so results are identical for any worker count.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport INFINITY

cnp.import_array()

# Keep in sync with _kernels_np.DUP_REL_EPS.
cdef double DUP_REL_EPS = 1e-11

cdef int MAX_TOPM = 64
cdef int MAX_KCOLS = 64
cdef Py_ssize_t COL_TILE = 4096


cdef inline double _direct_sqdist(const float* q, const float* r, Py_ssize_t dim) nogil:
    cdef Py_ssize_t d
    cdef double diff, acc = 0.0
    for d in range(dim):
        diff = <double> q[d] - <double> r[d]
        acc += diff * diff
    return acc


cdef void _convert_row(double* grow, double qn_i, const double* rn,
                       const float* qrow, const float* r32, Py_ssize_t n,
                       Py_ssize_t dim) nogil:
    cdef Py_ssize_t j
    cdef double s, v
    for j in range(n):
        s = qn_i + rn[j]
        v = s - 2.0 * grow[j]
        if v < 0.0:
            v = 0.0
        if v <= s * DUP_REL_EPS:
            v = _direct_sqdist(qrow, r32 + j * dim, dim)
        grow[j] = v


def sqdists_block(double[:, ::1] g, const double[::1] qn, const double[::1] rn,
                  const float[:, ::1] q32, const float[:, ::1] r32, int workers=1):
    """Overwrite the Gram block with clamped squared distances; returns it."""
    cdef Py_ssize_t rows = g.shape[0]
    cdef Py_ssize_t n = g.shape[1]
    cdef Py_ssize_t dim = q32.shape[1]
    cdef Py_ssize_t i
    for i in prange(rows, nogil=True, num_threads=workers, schedule="static"):
        _convert_row(&g[i, 0], qn[i], &rn[0], &q32[i, 0], &r32[0, 0], n, dim)
    return np.asarray(g)


cdef void _row_topm(const double* drow, Py_ssize_t n, Py_ssize_t self_j,
                    Py_ssize_t m, double* out) nogil:
    cdef double buf[64]
    cdef Py_ssize_t t, j, pos
    cdef double v
    for t in range(m):
        buf[t] = INFINITY
    for j in range(n):
        if j == self_j:
            continue
        v = drow[j]
        if v < buf[m - 1]:
            pos = m - 1
            while pos > 0 and buf[pos - 1] > v:
                buf[pos] = buf[pos - 1]
                pos = pos - 1
            buf[pos] = v
    for t in range(m):
        out[t] = buf[t]


def smallest_block(double[:, ::1] d2, int m, Py_ssize_t self_base, int workers=1):
    """Per row of a converted block, the m smallest values in ascending order."""
    if m > MAX_TOPM:
        raise ValueError("compiled selection kernel handles m <= %d" % MAX_TOPM)
    cdef Py_ssize_t rows = d2.shape[0]
    cdef Py_ssize_t n = d2.shape[1]
    out_arr = np.empty((rows, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, self_j
    for i in prange(rows, nogil=True, num_threads=workers, schedule="static"):
        self_j = self_base + i if self_base >= 0 else -1
        _row_topm(&d2[i, 0], n, self_j, m, &out[i, 0])
    return out_arr


cdef void _row_score(const double* drow, Py_ssize_t n, const double* radii2,
                     Py_ssize_t kcols, bint want_realism,
                     cnp.int64_t* argmin, cnp.int64_t* counts, double* realism2) nogil:
    cdef double best[64]
    cdef cnp.int64_t bestj[64]
    cdef cnp.int64_t cnt[64]
    cdef Py_ssize_t t, j
    cdef double v, r2, ratio, realmax = 0.0
    for t in range(kcols):
        best[t] = INFINITY
        bestj[t] = -1
        cnt[t] = 0
    for j in range(n):
        v = drow[j]
        if want_realism:
            if v == 0.0:
                realmax = INFINITY
            else:
                ratio = radii2[j * kcols] / v
                if ratio > realmax:
                    realmax = ratio
        for t in range(kcols):
            r2 = radii2[j * kcols + t]
            if v <= r2:
                cnt[t] = cnt[t] + 1
                if r2 < best[t]:
                    best[t] = r2
                    bestj[t] = j
    for t in range(kcols):
        argmin[t] = bestj[t]
        counts[t] = cnt[t]
    if want_realism:
        realism2[0] = realmax


def score_block(double[:, ::1] d2, const double[:, ::1] radii2, bint want_realism,
                int workers=1):
    """Membership reductions of one converted block against K radius columns."""
    cdef Py_ssize_t kcols = radii2.shape[1]
    if kcols > MAX_KCOLS:
        raise ValueError("compiled score kernel handles at most %d radius columns" % MAX_KCOLS)
    cdef Py_ssize_t rows = d2.shape[0]
    cdef Py_ssize_t n = d2.shape[1]
    argmin_arr = np.empty((rows, kcols), dtype=np.int64)
    counts_arr = np.empty((rows, kcols), dtype=np.int64)
    realism_arr = np.empty(rows, dtype=np.float64) if want_realism else None
    cdef cnp.int64_t[:, ::1] argmin = argmin_arr
    cdef cnp.int64_t[:, ::1] counts = counts_arr
    cdef double[::1] realism2 = realism_arr
    cdef Py_ssize_t i
    if want_realism:
        for i in prange(rows, nogil=True, num_threads=workers, schedule="static"):
            _row_score(&d2[i, 0], n, &radii2[0, 0], kcols, 1,
                       &argmin[i, 0], &counts[i, 0], &realism2[i])
    else:
        for i in prange(rows, nogil=True, num_threads=workers, schedule="static"):
            _row_score(&d2[i, 0], n, &radii2[0, 0], kcols, 0,
                       &argmin[i, 0], &counts[i, 0], NULL)
    return argmin_arr, counts_arr, realism_arr


def colmin_block(double[:, ::1] d2, int workers=1):
    """Per reference column, the minimum value over the block's rows."""
    cdef Py_ssize_t rows = d2.shape[0]
    cdef Py_ssize_t n = d2.shape[1]
    out_arr = np.full(n, np.inf, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t ntiles = (n + COL_TILE - 1) // COL_TILE
    cdef Py_ssize_t tile, j0, j1, i, j
    cdef double v
    for tile in prange(ntiles, nogil=True, num_threads=workers, schedule="static"):
        j0 = tile * COL_TILE
        j1 = j0 + COL_TILE
        if j1 > n:
            j1 = n
        for i in range(rows):
            for j in range(j0, j1):
                v = d2[i, j]
                if v < out[j]:
                    out[j] = v
    return out_arr
