"""Higher-level studies: rank-correlation across neighborhood sizes, top-p%
means, histograms, union-manifold dataset comparison and NND ranking."""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyReportError, StudyError, UndefinedCorrelationError
from .feature_store import FeatureSet
from .formatting import fmt_f32, fmt_f64
from .knn_engine import DistanceConfig, knn_radii, knn_radii_upto, nnd, score_sweep
from .metrics import RarityReport, _rarity_from_argmin

DEFAULT_P_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))


# --- rank correlation --------------------------------------------------------

def average_ranks(x):
    """1-based fractional ranks; tied values share the mean of their positions.

    Accepts inf entries (they rank above every finite value).
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    order = np.argsort(x, kind="stable")
    xs = x[order]
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], n]
    mean_ranks = (starts + ends - 1) / 2.0 + 1.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(mean_ranks, ends - starts)
    return ranks


def _pearson_of_ranks(rx, ry):
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    vx = float(rx @ rx)
    vy = float(ry @ ry)
    if vx == 0.0 or vy == 0.0:
        raise UndefinedCorrelationError("zero rank variance: correlation undefined")
    rho = float(rx @ ry) / math.sqrt(vx * vy)
    return min(1.0, max(-1.0, rho))


def spearman(x, y):
    """Spearman rank correlation: Pearson correlation of fractional ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise ValueError("inputs must be 1-D vectors of equal length")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 observations")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("inputs must be finite")
    return _pearson_of_ranks(average_ranks(x), average_ranks(y))


@dataclass(frozen=True)
class RankCorrelationStudy:
    k_values: tuple  # the inclusive k range, ascending
    restriction: int  # samples restricted to the manifold at this k
    matrix: np.ndarray  # (K, K) Spearman rho, symmetric, unit diagonal
    mean_row: np.ndarray  # row of the matrix at the smallest k
    oom_curve: np.ndarray  # per-k out-of-manifold fraction over all fakes
    n_restricted: int


def rank_correlation_study(reals, fakes, k_range=(1, 10), restriction=1, cfg=None):
    """Spearman correlation matrix of rarity scores across a k range.

    The correlated sample set is fixed to the fakes inside the reference
    manifold at ``restriction``; their scores are computed at every k in the
    inclusive ``k_range``.  For k below ``restriction`` a sample may be
    outside the manifold; such samples enter the ranking as tied at +inf
    (rarer than any scored sample).  The OOM curve is computed over all
    fakes.
    """
    cfg = cfg or DistanceConfig()
    lo, hi = int(k_range[0]), int(k_range[1])
    if lo < 1 or hi < lo:
        raise ValueError("invalid k range %r" % (k_range,))
    if not lo <= restriction <= hi:
        raise ValueError("restriction %d outside k range %d..%d" % (restriction, lo, hi))
    if hi > reals.n - 1:
        raise ValueError("k range needs at least %d real samples, have %d" % (hi + 1, reals.n))
    k_values = tuple(range(lo, hi + 1))
    radii_all = knn_radii_upto(reals, hi, cfg)  # (N, hi), column k-1
    radii = np.ascontiguousarray(radii_all[:, [k - 1 for k in k_values]])
    argmin, _, _, _ = score_sweep(reals.data, radii, fakes.data, cfg)
    scored = argmin >= 0
    oom_curve = 1.0 - scored.mean(axis=0)
    t_res = k_values.index(restriction)
    mask = scored[:, t_res]
    n_restricted = int(mask.sum())
    if n_restricted < 2:
        raise StudyError("only %d fake samples inside the manifold at k=%d" % (n_restricted, restriction))
    nk = len(k_values)
    ranks = []
    for t in range(nk):
        am = argmin[mask, t]
        col = radii[:, t].astype(np.float64)
        scores = np.where(am >= 0, col[np.where(am >= 0, am, 0)], np.inf)
        ranks.append(average_ranks(scores))
    matrix = np.eye(nk, dtype=np.float64)
    for a in range(nk):
        for b in range(a + 1, nk):
            try:
                rho = _pearson_of_ranks(ranks[a], ranks[b])
            except UndefinedCorrelationError as e:
                raise StudyError("correlation undefined for k=%d vs k=%d: %s" % (k_values[a], k_values[b], e))
            matrix[a, b] = rho
            matrix[b, a] = rho
    return RankCorrelationStudy(
        k_values=k_values,
        restriction=restriction,
        matrix=matrix,
        mean_row=matrix[0].copy(),
        oom_curve=oom_curve,
        n_restricted=n_restricted,
    )


# --- top-p% means -------------------------------------------------------------

@dataclass(frozen=True)
class TopPStudy:
    p_grid: tuple  # percentages
    means: dict  # model name -> tuple of mean scores, aligned with p_grid


def mean_top_p(report, p):
    """Mean rarity over the top p percent of scored samples.

    Scored samples are ranked by score descending (ties by sample id
    ascending); out-of-manifold samples are excluded from both the numerator
    and the population.
    """
    if not 0.0 < p <= 100.0:
        raise ValueError("p must be in (0, 100], got %r" % (p,))
    scored = report.scored_records()
    if not scored:
        raise EmptyReportError("report has no scored samples")
    scored.sort(key=lambda r: (-r.score, r.sample_id))
    m = math.ceil(p / 100.0 * len(scored))
    return float(np.mean([r.score for r in scored[:m]]))


def top_p_table(reports, p_grid=DEFAULT_P_GRID):
    """Per-model mean-of-top-p%% table over a percentage grid."""
    means = {name: tuple(mean_top_p(rep, p) for p in p_grid) for name, rep in reports.items()}
    return TopPStudy(p_grid=tuple(p_grid), means=means)


# --- histograms ---------------------------------------------------------------

@dataclass(frozen=True)
class HistogramSpec:
    bin_count: int = 64
    upper: float = 1.0  # bins partition [0, upper]
    normalize: bool = True  # density = count / (total * bin_width)

    def __post_init__(self):
        if self.bin_count < 1:
            raise ValueError("bin_count must be positive")
        if not (np.isfinite(self.upper) and self.upper > 0):
            raise ValueError("histogram range upper bound must be positive")


def histogram(scores, spec):
    """Fixed-width binning of [0, upper]; the top boundary lands in the last bin.

    Returns a list of (bin_lower, bin_upper, value) with value a count or a
    density depending on ``spec.normalize``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("cannot histogram an empty score vector")
    if (scores < 0).any() or (scores > spec.upper).any():
        raise ValueError("scores outside [0, %g]; set the range from the data first" % spec.upper)
    width = spec.upper / spec.bin_count
    idx = np.floor(scores / width).astype(np.int64)
    idx[idx >= spec.bin_count] = spec.bin_count - 1
    counts = np.bincount(idx, minlength=spec.bin_count).astype(np.float64)
    values = counts / (scores.size * width) if spec.normalize else counts
    out = []
    for i in range(spec.bin_count):
        hi = spec.upper if i == spec.bin_count - 1 else (i + 1) * width
        out.append((i * width, hi, float(values[i])))
    return out


# --- union-manifold dataset comparison ----------------------------------------

def union_compare(set_a, set_b, k, cfg=None):
    """Score two datasets on the manifold of their union.

    One index is built over the concatenation (radii exclude self as always);
    every sample is inside its own sphere at distance zero, so none is
    out-of-manifold.  Returns (report_a, report_b, normalization_constant)
    where the constant is the maximum score across both reports; dividing by
    it puts both score sets on a shared (0, 1] axis.
    """
    cfg = cfg or DistanceConfig()
    if set_a.dim != set_b.dim:
        raise ValueError("dimension mismatch: A D=%d, B D=%d" % (set_a.dim, set_b.dim))
    if set_a.n + set_b.n <= k:
        raise ValueError("union of %d samples cannot support k=%d" % (set_a.n + set_b.n, k))
    union_ids = tuple("a:%s" % i for i in set_a.ids) + tuple("b:%s" % i for i in set_b.ids)
    union = FeatureSet(
        ids=union_ids,
        data=np.ascontiguousarray(np.vstack([set_a.data, set_b.data])),
        source_tag="%s+%s" % (set_a.source_tag, set_b.source_tag),
    )
    index = knn_radii(union, k, cfg)
    argmin, _, _, _ = score_sweep(union.data, index.radii, union.data, cfg)
    full = _rarity_from_argmin(index, union_ids, argmin[:, 0])
    if full.n_oom:
        raise AssertionError("union scoring produced out-of-manifold samples")
    rec = full.records
    report_a = RarityReport(
        records=tuple(
            r.__class__(sample_id=set_a.ids[i], status=r.status, score=r.score, argmin_sphere=r.argmin_sphere)
            for i, r in enumerate(rec[: set_a.n])
        ),
        k=k,
    )
    report_b = RarityReport(
        records=tuple(
            r.__class__(sample_id=set_b.ids[i], status=r.status, score=r.score, argmin_sphere=r.argmin_sphere)
            for i, r in enumerate(rec[set_a.n :])
        ),
        k=k,
    )
    norm = max(
        max((r.score for r in report_a.records), default=0.0),
        max((r.score for r in report_b.records), default=0.0),
    )
    return report_a, report_b, float(norm)


# --- NND ranking ---------------------------------------------------------------

def nnd_ranking(reals, cfg=None):
    """Samples ordered by nearest-neighbor distance ascending, ties by id."""
    values = nnd(reals, cfg)
    ids_arr = np.array(reals.ids)
    order = np.lexsort((ids_arr, values.astype(np.float64)))
    return [(reals.ids[i], float(values[i])) for i in order]


def nnd_slices(ranking, seed, head_n=10, middle_n=10, tail_n=10, middle_pool=200):
    """Head/middle/tail id slices of an NND ranking.

    The middle slice is a seeded uniform draw from the middle-ranked pool
    (nominally ``middle_pool`` ranks centered on the median).  When the set
    is too small for the nominal pool, the pool shrinks to the ranks not in
    the head/tail slices, then to all ranks.  Drawn ids are listed in rank
    order.
    """
    n = len(ranking)
    head = [ranking[i][0] for i in range(min(head_n, n))]
    tail = [ranking[i][0] for i in range(max(0, n - tail_n), n)]
    lo = max(0, n // 2 - middle_pool // 2)
    hi = min(n, n // 2 + middle_pool // 2)
    excluded = set(range(min(head_n, n))) | set(range(max(0, n - tail_n), n))
    pool = [r for r in range(lo, hi) if r not in excluded]
    if not pool:
        pool = [r for r in range(n) if r not in excluded]
    if not pool:
        pool = list(range(n))
    rng = np.random.Generator(np.random.Philox(seed))
    take = min(middle_n, len(pool))
    drawn = sorted(rng.choice(len(pool), size=take, replace=False).tolist())
    middle = [ranking[pool[r]][0] for r in drawn]
    return {"head": head, "middle": middle, "tail": tail}


# --- serialization --------------------------------------------------------------

def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def study_matrix_csv(study):
    header = ["k"] + ["k%d" % k for k in study.k_values]
    rows = [
        [str(k)] + [fmt_f64(v) for v in study.matrix[i]]
        for i, k in enumerate(study.k_values)
    ]
    return _csv_text(header, rows)


def study_mean_row_csv(study):
    header = ["k_prime", "rho"]
    rows = [[str(k), fmt_f64(study.mean_row[i])] for i, k in enumerate(study.k_values)]
    return _csv_text(header, rows)


def study_oom_csv(study):
    header = ["k", "oom_fraction"]
    rows = [[str(k), fmt_f64(study.oom_curve[i])] for i, k in enumerate(study.k_values)]
    return _csv_text(header, rows)


def study_to_json_obj(study):
    return {
        "k_values": list(study.k_values),
        "restriction": study.restriction,
        "n_restricted": study.n_restricted,
        "matrix": [[float(v) for v in row] for row in study.matrix],
        "mean_row": [float(v) for v in study.mean_row],
        "oom_curve": [float(v) for v in study.oom_curve],
    }


def top_p_csv(study):
    header = ["p"] + list(study.means)
    rows = [
        [fmt_f64(p)] + [fmt_f64(study.means[name][i]) for name in study.means]
        for i, p in enumerate(study.p_grid)
    ]
    return _csv_text(header, rows)


def top_p_to_json_obj(study):
    return {
        "p_grid": [float(p) for p in study.p_grid],
        "means": {name: [float(v) for v in vals] for name, vals in study.means.items()},
    }


def histogram_csv(bins_by_label):
    """Shared-edge histograms as one CSV; one value column per label."""
    labels = list(bins_by_label)
    first = bins_by_label[labels[0]]
    header = ["bin_lower", "bin_upper"] + ["density_%s" % lab for lab in labels]
    rows = []
    for i, (lo, hi, _) in enumerate(first):
        row = [fmt_f64(lo), fmt_f64(hi)]
        row += [fmt_f64(bins_by_label[lab][i][2]) for lab in labels]
        rows.append(row)
    return _csv_text(header, rows)


def nnd_csv(ranking):
    header = ["rank", "sample_id", "nnd"]
    rows = [[str(i + 1), sid, fmt_f32(v)] for i, (sid, v) in enumerate(ranking)]
    return _csv_text(header, rows)
