"""idstack: a two-layer supervised-unsupervised stacker for anomaly-based
network intrusion detection.

Unsupervised base learners turn raw flow features into model-based
meta-features (numeric scores, thresholded votes and voting counters); a
supervised meta-level classifier consumes them together with the original
features to detect both known and zero-day attacks.
"""

from .dataset import (
    DataError,
    DataPoint,
    Dataset,
    DatasetSchema,
    NormalizationStats,
    dataset_from_arrays,
    ingest_csv,
    load_cache,
    normalize,
    save_cache,
)
from .decision import DecisionFunction, fit_best_mcc, fit_iqr, fixed_threshold
from .infogain import information_gain, select_features
from .learners import AlgorithmSpec, SharedFitContext, default_ensemble_specs, fit
from .metafeatures import (
    MetaFeatureRow,
    ReputationVector,
    count_votes,
    reputation_from_validation,
    wcount_votes,
)
from .metalevel import MetaClassifierSpec, default_meta_grid, fit_meta
from .metrics import ConfusionMatrix, MetricReport, auc_score, confusion, matthews_corrcoef, report
from .neighbors import NeighborIndex
from .pipeline import (
    ComparisonRun,
    StackerModel,
    fit_stacker,
    load_stacker,
    predict_stacker,
    run_comparison,
    save_stacker,
)
from .splits import SplitDataset, VariantSpec, all_variant_specs, make_variant
from .tuning import TuningResult, base_grid_for, tune_base, tune_meta

__version__ = "0.1.0"
