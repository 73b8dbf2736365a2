"""Benchmark the compiled block kernels against the NumPy fallback.

Runs the two hot sweeps (k-NN radii over a reference set; membership scoring
of a query set) under each backend and prints a timing table.  The Gram
products go through BLAS either way; the difference is the per-block
conversion plus reduction kernels.

Usage: python benchmarks/bench_kernels.py [--n 8000] [--d 128] [--k 3]
       [--fakes 2000] [--repeats 1]
"""

import argparse
import os
import time

import numpy as np

from rarity_metrics.feature_store import FeatureSet
from rarity_metrics.knn_engine import (
    DistanceConfig,
    compiled_available,
    knn_radii,
    score_sweep,
)


def timed(fn, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def run_backend(name, fs, fakes, k, cfg, repeats):
    os.environ["RARITY_FORCE_FALLBACK"] = "" if name == "compiled" else "1"
    try:
        t_radii, index = timed(lambda: knn_radii(fs, k, cfg), repeats)
        t_score, sweep = timed(
            lambda: score_sweep(fs.data, index.radii, fakes, cfg,
                                want_realism=True, want_colmin=True),
            repeats,
        )
    finally:
        os.environ.pop("RARITY_FORCE_FALLBACK", None)
    return {"radii": t_radii, "score": t_score,
            "radii_checksum": float(index.radii.sum()),
            "argmin_checksum": int(sweep[0].sum())}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8000, help="reference rows")
    ap.add_argument("--d", type=int, default=128, help="embedding dimension")
    ap.add_argument("--k", type=int, default=3, help="neighborhood size")
    ap.add_argument("--fakes", type=int, default=2000, help="query rows")
    ap.add_argument("--repeats", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    fs = FeatureSet.from_array(rng.standard_normal((args.n, args.d), dtype=np.float32))
    fakes = rng.standard_normal((args.fakes, args.d), dtype=np.float32)
    cfg = DistanceConfig()

    print("reference %dx%d, %d queries, k=%d" % (args.n, args.d, args.fakes, args.k))
    results = {}
    backends = ["numpy"] + (["compiled"] if compiled_available() else [])
    if len(backends) == 1:
        print("compiled kernels not built; timing the fallback only")
    for name in backends:
        results[name] = run_backend(name, fs, fakes, args.k, cfg, args.repeats)
        print("%-9s knn_radii %8.3fs   score_sweep %8.3fs"
              % (name, results[name]["radii"], results[name]["score"]))
    if len(results) == 2:
        for op in ("radii", "score"):
            speedup = results["numpy"][op] / results["compiled"][op]
            print("speedup %-10s %.2fx" % (op, speedup))
        same = (results["numpy"]["radii_checksum"] == results["compiled"]["radii_checksum"]
                and results["numpy"]["argmin_checksum"] == results["compiled"]["argmin_checksum"])
        print("outputs identical across backends:", same)


if __name__ == "__main__":
    main()
