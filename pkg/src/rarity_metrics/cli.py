"""Command-line workflows over embedding matrices.

Subcommands: ``score``, ``compare-models``, ``compare-datasets``,
``rank-analysis``, ``nnd``.  Data goes only to files under ``--out``;
diagnostics go to stderr; the exit code is 0 exactly when every requested
output was fully written.  All commands are deterministic for fixed inputs
and config: worker count and block size never change output bytes.
"""

import json
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass

import click
import numpy as np

from .analysis import (
    DEFAULT_P_GRID,
    HistogramSpec,
    histogram,
    histogram_csv,
    mean_top_p,
    nnd_csv,
    nnd_ranking,
    nnd_slices,
    rank_correlation_study,
    study_matrix_csv,
    study_mean_row_csv,
    study_oom_csv,
    study_to_json_obj,
    top_p_csv,
    top_p_table,
    top_p_to_json_obj,
    union_compare,
)
from .feature_store import load_features, load_manifest, subsample
from .formatting import json_float
from .knn_engine import DistanceConfig, knn_radii
from .metrics import (
    STATUS_SCORED,
    RarityReport,
    evaluate,
    rarity,
    rarity_report_to_csv,
    rarity_report_to_json_obj,
)
from .svg import render_heatmap_svg, render_histogram_svg


@dataclass(frozen=True)
class RunConfig:
    """Resolved per-run options shared by the commands."""

    k: int = 3
    real_count: int = 30000
    fake_count: int = 10000
    seed: int = 0
    output_dir: str = "."
    format: str = "csv"
    distance: DistanceConfig = DistanceConfig()
    realism_prune_fraction: float = 0.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.real_count < self.k + 1 or self.fake_count < self.k + 1:
            raise ValueError("sample counts must be at least k+1")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")


class _OutputStager:
    """Collects output files and writes them all at the end of a command.

    Nothing touches the filesystem until every artifact has been computed;
    a failure while flushing removes whatever was already written, so a
    nonzero exit never leaves partial outputs behind.
    """

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.items = []

    def add_text(self, name, text):
        self.items.append((name, text.encode("utf-8")))

    def add_json(self, name, obj):
        self.add_text(name, json.dumps(obj, indent=2) + "\n")

    def add_lines(self, name, lines):
        self.add_text(name, "".join(line + "\n" for line in lines))

    def flush(self):
        os.makedirs(self.out_dir, exist_ok=True)
        written = []
        try:
            for name, data in self.items:
                path = os.path.join(self.out_dir, name)
                with open(path, "wb") as f:
                    f.write(data)
                written.append(path)
        except BaseException:
            for path in written:
                try:
                    os.remove(path)
                except OSError:
                    pass
            raise


@contextmanager
def _errors():
    try:
        yield
    except Exception as e:
        click.echo("error: %s" % e, err=True)
        sys.exit(1)


def _engine_options(f):
    f = click.option("--block-rows", type=int, default=0, show_default="auto",
                     help="Query rows per distance block (0 derives from the memory budget).")(f)
    f = click.option("--memory-budget", type=int, default=1 << 30, show_default=True,
                     help="Bytes allowed for the blocked distance working set.")(f)
    f = click.option("--workers", type=int, default=0, show_default="all cores",
                     help="Worker threads for the per-block kernels (0 = all logical processors).")(f)
    return f


def _sampling_options(f):
    f = click.option("--real-count", type=int, default=30000, show_default=True,
                     help="Reference samples used (subsampled when the file has more).")(f)
    f = click.option("--fake-count", type=int, default=10000, show_default=True,
                     help="Generated samples used (subsampled when the file has more).")(f)
    f = click.option("--seed", type=int, default=0, show_default=True,
                     help="Base seed for all subsampling and slice draws.")(f)
    return f


def _output_options(f):
    f = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
                     show_default=True, help="Report serialization format.")(f)
    f = click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
                     help="Output directory.")(f)
    return f


def _dist_config(block_rows, memory_budget, workers):
    return DistanceConfig(block_rows=block_rows, memory_budget_bytes=memory_budget, workers=workers)


def _used(fs, count, seed):
    """Subsample when the set is larger than the requested count."""
    if fs.n > count:
        return subsample(fs, count, seed)
    return fs


def _sorted_report(report):
    scored = [r for r in report.records if r.status == STATUS_SCORED]
    oom = [r for r in report.records if r.status != STATUS_SCORED]
    scored.sort(key=lambda r: (-r.score, r.sample_id))
    oom.sort(key=lambda r: r.sample_id)
    return RarityReport(records=tuple(scored + oom), k=report.k)


def _top_ids(report, n=10):
    return [r.sample_id for r in _sorted_report(report).records if r.status == STATUS_SCORED][:n]


def _add_rarity_report(stager, name, report, fmt):
    if fmt == "csv":
        stager.add_text(name + ".csv", rarity_report_to_csv(report))
    else:
        stager.add_json(name + ".json", rarity_report_to_json_obj(report))


def _rarity_aggregates(report):
    scores = report.scored_scores()
    return {
        "n_scored": report.n_scored,
        "n_oom": report.n_oom,
        "mean_scored": float(scores.mean()) if scores.size else None,
        "max_scored": float(scores.max()) if scores.size else None,
        "min_scored": float(scores.min()) if scores.size else None,
    }


def _realism_aggregates(report):
    vals = np.array([r.realism for r in report.records], dtype=np.float64)
    finite = vals[np.isfinite(vals)]
    return {
        "n_infinite": int((~np.isfinite(vals)).sum()),
        "mean_finite": float(finite.mean()) if finite.size else None,
        "max_finite": float(finite.max()) if finite.size else None,
        "median": json_float(np.median(vals)) if vals.size else None,
    }


def _safe_name(name):
    return "".join(c if c.isalnum() or c in "-._" else "_" for c in name)


@click.group()
def main():
    """k-NN manifold metrics and per-sample rarity analysis over embeddings."""


@main.command()
@click.argument("real_path")
@click.argument("fake_path")
@click.option("--k", type=int, default=3, show_default=True, help="Neighborhood size.")
@click.option("--realism-prune-fraction", type=float, default=0.0, show_default=True,
              help="Fraction of largest-radius spheres dropped for realism.")
@_sampling_options
@_engine_options
@_output_options
def score(real_path, fake_path, k, realism_prune_fraction, real_count, fake_count,
          seed, block_rows, memory_budget, workers, fmt, out_dir):
    """Score FAKE_PATH against REAL_PATH: rarity report plus metric summary."""
    with _errors():
        cfg = _dist_config(block_rows, memory_budget, workers)
        run = RunConfig(k=k, real_count=real_count, fake_count=fake_count, seed=seed,
                        output_dir=out_dir, format=fmt, distance=cfg,
                        realism_prune_fraction=realism_prune_fraction)
        real = _used(load_features(real_path), run.real_count, run.seed)
        fake = _used(load_features(fake_path), run.fake_count, run.seed + 1)
        summary, rarity_report, realism_report = evaluate(
            real, fake, run.k, cfg, realism_prune_fraction=run.realism_prune_fraction
        )
        stager = _OutputStager(out_dir)
        _add_rarity_report(stager, "rarity", _sorted_report(rarity_report), fmt)
        summary_obj = summary.to_dict()
        summary_obj["oom_fraction"] = rarity_report.oom_fraction()
        summary_obj["rarity"] = _rarity_aggregates(rarity_report)
        summary_obj["realism"] = _realism_aggregates(realism_report)
        summary_obj["realism_prune_fraction"] = run.realism_prune_fraction
        stager.add_json("summary.json", summary_obj)
        stager.add_lines("real_selected_ids.txt", real.ids)
        stager.add_lines("fake_selected_ids.txt", fake.ids)
        stager.flush()


@main.command("compare-models")
@click.option("--manifest", "manifest_path", required=True, help="JSON manifest: one real entry, fake entries to compare.")
@click.option("--k", type=int, default=3, show_default=True, help="Neighborhood size.")
@_sampling_options
@_engine_options
@_output_options
def compare_models(manifest_path, k, real_count, fake_count, seed,
                   block_rows, memory_budget, workers, fmt, out_dir):
    """Rank generative models by mean rarity of their top-p% samples."""
    with _errors():
        cfg = _dist_config(block_rows, memory_budget, workers)
        run = RunConfig(k=k, real_count=real_count, fake_count=fake_count, seed=seed,
                        output_dir=out_dir, format=fmt, distance=cfg)
        manifest = load_manifest(manifest_path)
        real_entries = manifest.by_role("real")
        fake_entries = manifest.by_role("fake")
        if len(real_entries) != 1 or not fake_entries:
            raise ValueError(
                "manifest must contain exactly one real entry and at least one fake entry"
            )
        real_fs = load_features(real_entries[0].path)
        fakes = []
        for entry in fake_entries:
            fs = load_features(entry.path)
            if fs.dim != real_fs.dim:
                raise ValueError(
                    "entry %r: dimension %d does not match real dimension %d"
                    % (entry.name, fs.dim, real_fs.dim)
                )
            fakes.append((entry.name, fs))
        real_used = _used(real_fs, run.real_count, run.seed)
        index = knn_radii(real_used, run.k, cfg)
        stager = _OutputStager(out_dir)
        stager.add_lines("%s_selected_ids.txt" % _safe_name(real_entries[0].name), real_used.ids)
        reports = {}
        for i, (name, fs) in enumerate(fakes):
            fake_used = _used(fs, run.fake_count, run.seed + 1 + i)
            reports[name] = rarity(index, fake_used, cfg)
            stager.add_lines("%s_selected_ids.txt" % _safe_name(name), fake_used.ids)
        study = top_p_table(reports, DEFAULT_P_GRID)
        stager.add_text("topp.csv", top_p_csv(study))
        stager.add_json("topp.json", top_p_to_json_obj(study))
        stager.add_json("top10_ids.json", {name: _top_ids(rep) for name, rep in reports.items()})
        stager.flush()


@main.command("compare-datasets")
@click.argument("path_a")
@click.argument("path_b")
@click.option("--k", type=int, default=3, show_default=True, help="Neighborhood size.")
@click.option("--real-count", type=int, default=30000, show_default=True,
              help="Samples used from each dataset.")
@click.option("--seed", type=int, default=0, show_default=True)
@_engine_options
@_output_options
def compare_datasets(path_a, path_b, k, real_count, seed,
                     block_rows, memory_budget, workers, fmt, out_dir):
    """Compare two datasets' rarity distributions on their union manifold."""
    with _errors():
        cfg = _dist_config(block_rows, memory_budget, workers)
        run = RunConfig(k=k, real_count=real_count, seed=seed, output_dir=out_dir,
                        format=fmt, distance=cfg)
        set_a = _used(load_features(path_a), run.real_count, run.seed)
        set_b = _used(load_features(path_b), run.real_count, run.seed + 1)
        report_a, report_b, norm = union_compare(set_a, set_b, run.k, cfg)
        scores_a = report_a.scored_scores()
        scores_b = report_b.scored_scores()
        if norm > 0:
            norm_a, norm_b = scores_a / norm, scores_b / norm
        else:
            norm_a, norm_b = scores_a, scores_b
        spec = HistogramSpec(bin_count=64, upper=1.0, normalize=True)
        bins_a = histogram(norm_a, spec)
        bins_b = histogram(norm_b, spec)
        stager = _OutputStager(out_dir)
        _add_rarity_report(stager, "scores_a", _sorted_report(report_a), fmt)
        _add_rarity_report(stager, "scores_b", _sorted_report(report_b), fmt)
        stager.add_text("hist.csv", histogram_csv({"a": bins_a, "b": bins_b}))
        stager.add_text("hist.svg", render_histogram_svg(
            [("a: %s" % set_a.source_tag, bins_a), ("b: %s" % set_b.source_tag, bins_b)],
            title="normalized rarity scores", x_label="normalized score",
        ))
        stager.add_lines("top10_a.txt", _top_ids(report_a))
        stager.add_lines("top10_b.txt", _top_ids(report_b))
        stager.add_json("summary.json", {
            "k": run.k,
            "n_a": set_a.n,
            "n_b": set_b.n,
            "normalization_constant": norm,
        })
        stager.add_lines("a_selected_ids.txt", set_a.ids)
        stager.add_lines("b_selected_ids.txt", set_b.ids)
        stager.flush()


def _parse_k_range(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError("k range must look like LO:HI, got %r" % text)
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError:
        raise ValueError("k range must look like LO:HI with integers, got %r" % text) from None
    return lo, hi


@main.command("rank-analysis")
@click.argument("real_path")
@click.argument("fake_path")
@click.option("--k-range", "k_range_text", default="1:10", show_default=True,
              help="Inclusive neighborhood-size range LO:HI.")
@click.option("--restriction", type=int, default=1, show_default=True,
              help="Correlate the fakes inside the manifold at this k.")
@_sampling_options
@_engine_options
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Output directory.")
def rank_analysis(real_path, fake_path, k_range_text, restriction, real_count, fake_count,
                  seed, block_rows, memory_budget, workers, out_dir):
    """Spearman rank-correlation matrix of rarity scores across a k range."""
    with _errors():
        cfg = _dist_config(block_rows, memory_budget, workers)
        k_range = _parse_k_range(k_range_text)
        run = RunConfig(k=max(1, k_range[0]), real_count=real_count, fake_count=fake_count,
                        seed=seed, output_dir=out_dir, distance=cfg)
        real = _used(load_features(real_path), run.real_count, run.seed)
        fake = _used(load_features(fake_path), run.fake_count, run.seed + 1)
        study = rank_correlation_study(real, fake, k_range, restriction, cfg)
        stager = _OutputStager(out_dir)
        stager.add_text("matrix.csv", study_matrix_csv(study))
        stager.add_text("mean_row.csv", study_mean_row_csv(study))
        stager.add_text("oom_curve.csv", study_oom_csv(study))
        stager.add_json("study.json", study_to_json_obj(study))
        stager.add_text("heatmap.svg", render_heatmap_svg(
            study.matrix, ["k%d" % k for k in study.k_values],
            title="rarity rank correlation (restriction k=%d)" % study.restriction,
        ))
        stager.add_lines("real_selected_ids.txt", real.ids)
        stager.add_lines("fake_selected_ids.txt", fake.ids)
        stager.flush()


@main.command()
@click.argument("real_path")
@click.option("--real-count", type=int, default=30000, show_default=True,
              help="Samples used (subsampled when the file has more).")
@click.option("--seed", type=int, default=0, show_default=True)
@_engine_options
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Output directory.")
def nnd(real_path, real_count, seed, block_rows, memory_budget, workers, out_dir):
    """Rank samples by nearest-neighbor distance; emit head/middle/tail slices."""
    with _errors():
        cfg = _dist_config(block_rows, memory_budget, workers)
        real = _used(load_features(real_path), real_count, seed)
        ranking = nnd_ranking(real, cfg)
        slices = nnd_slices(ranking, seed)
        stager = _OutputStager(out_dir)
        stager.add_text("nnd.csv", nnd_csv(ranking))
        stager.add_lines("nnd_head.txt", slices["head"])
        stager.add_lines("nnd_middle.txt", slices["middle"])
        stager.add_lines("nnd_tail.txt", slices["tail"])
        stager.add_lines("real_selected_ids.txt", real.ids)
        stager.flush()


if __name__ == "__main__":
    main()
