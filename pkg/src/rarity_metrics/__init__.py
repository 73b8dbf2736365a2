"""Rarity scores and k-NN manifold evaluation metrics over feature embeddings."""

from .analysis import (
    HistogramSpec,
    RankCorrelationStudy,
    TopPStudy,
    histogram,
    mean_top_p,
    nnd_ranking,
    nnd_slices,
    rank_correlation_study,
    spearman,
    top_p_table,
    union_compare,
)
from .errors import (
    EmptyReportError,
    FeatureShapeError,
    FeatureValidationError,
    NpyFormatError,
    StudyError,
    UndefinedCorrelationError,
)
from .feature_store import (
    DatasetManifest,
    FeatureSet,
    load_features,
    load_manifest,
    save_features,
    subsample,
)
from .knn_engine import (
    DistanceConfig,
    ManifoldIndex,
    MembershipResult,
    active_backend,
    knn_radii,
    knn_radii_upto,
    load_radii_cache,
    membership,
    nnd,
    pairwise_sq_dists,
    save_radii_cache,
    score_sweep,
)
from .metrics import (
    MetricSummary,
    RarityRecord,
    RarityReport,
    RealismRecord,
    RealismReport,
    coverage,
    density,
    evaluate,
    precision,
    rarity,
    realism,
    recall,
)

__version__ = "0.1.0"
