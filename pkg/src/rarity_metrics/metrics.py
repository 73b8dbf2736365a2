"""Set-level and per-sample evaluation metrics over k-NN manifolds.

Implements precision, recall, density, coverage (set-level) and realism,
rarity (per-sample) for a generated set measured against a reference set.
A generated sample inside the reference manifold receives a rarity score
equal to the smallest radius among the reference spheres containing it;
samples outside every sphere are reported as out-of-manifold rather than
silently dropped.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .formatting import fmt_f32, fmt_f64, json_float
from .knn_engine import DistanceConfig, knn_radii, score_sweep

STATUS_SCORED = "scored"
STATUS_OOM = "out_of_manifold"


@dataclass(frozen=True)
class MetricSummary:
    precision: float
    recall: float
    density: float
    coverage: float
    k: int
    n_real: int
    n_fake: int

    def to_dict(self):
        return {
            "k": self.k,
            "n_real": self.n_real,
            "n_fake": self.n_fake,
            "precision": self.precision,
            "recall": self.recall,
            "density": self.density,
            "coverage": self.coverage,
        }


@dataclass(frozen=True)
class RarityRecord:
    sample_id: str
    status: str
    score: float = None  # present iff scored
    argmin_sphere: str = None  # id of the smallest containing sphere


@dataclass(frozen=True)
class RarityReport:
    records: tuple
    k: int

    @property
    def n_fake(self):
        return len(self.records)

    @property
    def n_scored(self):
        return sum(1 for r in self.records if r.status == STATUS_SCORED)

    @property
    def n_oom(self):
        return self.n_fake - self.n_scored

    def scored_records(self):
        return [r for r in self.records if r.status == STATUS_SCORED]

    def scored_scores(self):
        return np.array([r.score for r in self.scored_records()], dtype=np.float64)

    def oom_fraction(self):
        return self.n_oom / self.n_fake


@dataclass(frozen=True)
class RealismRecord:
    sample_id: str
    realism: float  # positive; inf when the sample coincides with a reference


@dataclass(frozen=True)
class RealismReport:
    records: tuple
    k: int


def _fakes_data(index, fakes):
    data = fakes.data if hasattr(fakes, "data") else np.ascontiguousarray(fakes, dtype=np.float32)
    if data.shape[1] != index.dim:
        raise ValueError("dimension mismatch: fakes D=%d, index D=%d" % (data.shape[1], index.dim))
    return data


def precision(real_index, fakes, cfg=None):
    """Fraction of fake samples inside the reference manifold."""
    data = _fakes_data(real_index, fakes)
    argmin, _, _, _ = score_sweep(real_index.features.data, real_index.radii, data, cfg)
    return float(np.mean(argmin[:, 0] >= 0))


def recall(reals, fake_index, cfg=None):
    """Fraction of real samples inside the generated manifold."""
    data = _fakes_data(fake_index, reals)
    argmin, _, _, _ = score_sweep(fake_index.features.data, fake_index.radii, data, cfg)
    return float(np.mean(argmin[:, 0] >= 0))


def density(real_index, fakes, cfg=None):
    """Containing-sphere count per fake sample, normalized by k."""
    data = _fakes_data(real_index, fakes)
    _, counts, _, _ = score_sweep(real_index.features.data, real_index.radii, data, cfg)
    return float(counts[:, 0].sum()) / (real_index.k * data.shape[0])


def coverage(real_index, fakes, cfg=None):
    """Fraction of reference spheres containing at least one fake sample."""
    data = _fakes_data(real_index, fakes)
    _, _, _, colmin = score_sweep(
        real_index.features.data, real_index.radii, data, cfg, want_colmin=True
    )
    return float(np.mean(colmin <= real_index.radii_sq64()))


def _prune_spheres(index, prune_fraction):
    """Indices of the spheres kept after dropping the largest-radius fraction."""
    n = index.n
    drop = int(math.floor(prune_fraction * n))
    keep = n - drop
    if keep < 1:
        raise ValueError("prune_fraction=%g leaves no spheres" % prune_fraction)
    order = np.argsort(index.radii, kind="stable")
    return np.sort(order[:keep])


def realism(real_index, fakes, cfg=None, prune_fraction=0.0):
    """Per-fake maximum of radius/distance over the reference spheres.

    A zero distance yields an inf sentinel; a zero radius at positive
    distance contributes ratio 0.  ``prune_fraction`` optionally drops that
    fraction of the largest-radius spheres before taking the maximum (0 uses
    every sphere).
    """
    if not 0.0 <= prune_fraction < 1.0:
        raise ValueError("prune_fraction must be in [0, 1)")
    data = _fakes_data(real_index, fakes)
    refs = real_index.features.data
    radii = real_index.radii
    if prune_fraction > 0.0:
        kept = _prune_spheres(real_index, prune_fraction)
        refs = np.ascontiguousarray(refs[kept])
        radii = radii[kept]
    _, _, realism2, _ = score_sweep(refs, radii, data, cfg, want_realism=True)
    values = np.sqrt(realism2)
    records = tuple(
        RealismRecord(sample_id=fakes.ids[i], realism=float(values[i])) for i in range(data.shape[0])
    )
    return RealismReport(records=records, k=real_index.k)


def _rarity_from_argmin(real_index, fake_ids, argmin):
    records = []
    for i, a in enumerate(argmin):
        if a >= 0:
            records.append(
                RarityRecord(
                    sample_id=fake_ids[i],
                    status=STATUS_SCORED,
                    score=float(real_index.radii[a]),
                    argmin_sphere=real_index.features.ids[a],
                )
            )
        else:
            records.append(RarityRecord(sample_id=fake_ids[i], status=STATUS_OOM))
    return RarityReport(records=tuple(records), k=real_index.k)


def rarity(real_index, fakes, cfg=None):
    """Rarity score per fake sample against the reference manifold.

    Scored samples get the minimum radius among containing spheres (radius
    ties broken toward the lowest reference index); samples contained in no
    sphere are flagged out-of-manifold and carry no score.
    """
    data = _fakes_data(real_index, fakes)
    argmin, _, _, _ = score_sweep(real_index.features.data, real_index.radii, data, cfg)
    return _rarity_from_argmin(real_index, fakes.ids, argmin[:, 0])


def evaluate(reals, fakes, k, cfg=None, realism_prune_fraction=0.0):
    """All metrics for one (real, fake, k) triple with two distance sweeps.

    Returns (MetricSummary, RarityReport, RealismReport).  Requires both
    sets to have at least k+1 samples (each side's manifold needs k
    neighbors per sample).
    """
    cfg = cfg or DistanceConfig()
    real_index = knn_radii(reals, k, cfg)
    data = _fakes_data(real_index, fakes)
    want_plain_realism = realism_prune_fraction == 0.0
    argmin, counts, realism2, colmin = score_sweep(
        reals.data, real_index.radii, data, cfg,
        want_realism=want_plain_realism, want_colmin=True,
    )
    rarity_report = _rarity_from_argmin(real_index, fakes.ids, argmin[:, 0])
    if want_plain_realism:
        values = np.sqrt(realism2)
        realism_report = RealismReport(
            records=tuple(
                RealismRecord(sample_id=fakes.ids[i], realism=float(values[i]))
                for i in range(data.shape[0])
            ),
            k=k,
        )
    else:
        realism_report = realism(real_index, fakes, cfg, prune_fraction=realism_prune_fraction)
    fake_index = knn_radii(fakes, k, cfg)
    recall_value = recall(reals, fake_index, cfg)
    summary = MetricSummary(
        precision=float(np.mean(argmin[:, 0] >= 0)),
        recall=recall_value,
        density=float(counts[:, 0].sum()) / (k * data.shape[0]),
        coverage=float(np.mean(colmin <= real_index.radii_sq64())),
        k=k,
        n_real=reals.n,
        n_fake=fakes.n,
    )
    return summary, rarity_report, realism_report


# --- serialization ----------------------------------------------------------

RARITY_CSV_COLUMNS = ("sample_id", "status", "score", "argmin_sphere")


def rarity_report_to_csv(report):
    """CSV text (UTF-8-ready, LF endings) in the report's record order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RARITY_CSV_COLUMNS)
    for r in report.records:
        if r.status == STATUS_SCORED:
            w.writerow([r.sample_id, r.status, fmt_f32(r.score), r.argmin_sphere])
        else:
            w.writerow([r.sample_id, r.status, "", ""])
    return buf.getvalue()


def rarity_report_to_json_obj(report):
    return {
        "k": report.k,
        "n_fake": report.n_fake,
        "n_scored": report.n_scored,
        "n_oom": report.n_oom,
        "records": [
            {
                "sample_id": r.sample_id,
                "status": r.status,
                "score": None if r.score is None else json_float(r.score),
                "argmin_sphere": r.argmin_sphere,
            }
            for r in report.records
        ],
    }


def realism_report_to_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_id", "realism"])
    for r in report.records:
        w.writerow([r.sample_id, fmt_f64(r.realism) if math.isfinite(r.realism) else "inf"])
    return buf.getvalue()


def realism_report_to_json_obj(report):
    return {
        "k": report.k,
        "records": [
            {"sample_id": r.sample_id, "realism": json_float(r.realism)} for r in report.records
        ],
    }
