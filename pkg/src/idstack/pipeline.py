"""End-to-end stacking pipeline: fit, predict, persist, compare.

Fitting wires the stages together: normalize from train stats, fit the
unsupervised ensemble over one shared neighbor index, derive per-learner
thresholds and reputations on the validation slice, assemble the requested
feature set and tune the supervised meta-level on it. Test data never
touches any fitting stage.
"""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import learners
from .archive import ArchiveReader, ArchiveWriter
from .dataset import Dataset, NormalizationStats, apply_normalization
from .decision import DecisionFunction, fit_best_mcc
from .infogain import select_features
from .learners import (
    AlgorithmSpec,
    BaseLearnerModel,
    SharedFitContext,
    model_from_payload,
)
from .metafeatures import (
    DATA_F,
    FULL_F,
    META_F,
    MetaFeatureRow,
    ReputationVector,
    assemble_features,
    assemble_matrix,
    reputation_from_validation,
)
from .metalevel import (
    MetaClassifierModel,
    MetaClassifierSpec,
    default_meta_grid,
    fit_meta,
    meta_model_from_payload,
)
from .metrics import MetricReport, report
from .splits import SplitDataset
from .tuning import TuningResult, tune_meta
from .util import child_seed, rng_for

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = "1"


def columns_digest(columns: list[str]) -> str:
    return hashlib.sha256("\x00".join(columns).encode()).hexdigest()


@dataclass
class BaseLayer:
    """Everything the unsupervised stage produces, reusable across kinds."""

    stats: NormalizationStats
    feature_indices: list[int]
    models: list[BaseLearnerModel]
    decisions: list[DecisionFunction]
    reputation: ReputationVector
    train_scores: np.ndarray      # per-point per-learner, train partition
    validation_scores: np.ndarray

    def score_points(self, features: np.ndarray) -> np.ndarray:
        selected = features[:, self.feature_indices]
        return np.column_stack([m.score(selected) for m in self.models])


@dataclass
class StackerModel:
    """Persisted bundle: normalization, ensemble, thresholds, meta-level."""

    dataset_name: str
    excluded_attack: str | None
    feature_set_kind: str
    feature_names: tuple[str, ...]
    normal_value: str
    stats: NormalizationStats
    feature_indices: list[int]
    ensemble: list[tuple[BaseLearnerModel, DecisionFunction]]
    reputation: ReputationVector
    meta_spec: MetaClassifierSpec
    meta: MetaClassifierModel
    columns: list[str]
    provenance: dict = field(default_factory=dict)
    format_version: str = MODEL_FORMAT_VERSION

    @property
    def columns_hash(self) -> str:
        return columns_digest(self.columns)


def _normalized_parts(split: SplitDataset) -> tuple[NormalizationStats, Dataset, Dataset]:
    for part, tag in ((split.train, "train"), (split.validation, "validation")):
        if part.partition_tag == "test":
            raise ValueError(f"{tag} partition is tagged test; refusing to fit")
    stats = NormalizationStats.from_matrix(split.train.features)
    train = split.train.replace(features=apply_normalization(split.train.features, stats))
    validation = split.validation.replace(
        features=apply_normalization(split.validation.features, stats))
    return stats, train, validation


def fit_base_layer(split: SplitDataset, ensemble_specs: list[AlgorithmSpec],
                   seed: int, base_sample_fraction: float = 1.0,
                   feature_policy: str = "none", top_k: int | None = None,
                   ) -> BaseLayer:
    """Fit the unsupervised ensemble and its decision/reputation stage.

    The shared neighbor index serves every neighbor-based learner, and the
    fitted K-Means is reused by LDCOF when cluster counts agree. Learners
    may fit on a seeded row subsample; scores are always computed for the
    full train and validation partitions.
    """
    if not ensemble_specs:
        raise ValueError("ensemble must contain at least one learner")
    stats, train, validation = _normalized_parts(split)

    if feature_policy == "none":
        indices = list(range(train.n_features))
    else:
        indices = select_features(train, feature_policy, top_k)
    base_train = train.features[:, indices]
    if base_sample_fraction < 1.0:
        keep = max(2, int(round(len(base_train) * base_sample_fraction)))
        rows = np.sort(rng_for(seed, "base-sample").permutation(len(base_train))[:keep])
        fit_matrix = base_train[rows]
    else:
        fit_matrix = base_train

    # KMeans fits before LDCOF so LDCOF can reuse its clustering
    order = sorted(range(len(ensemble_specs)),
                   key=lambda i: (ensemble_specs[i].algorithm == "LDCOF", i))
    shared = SharedFitContext()
    models: list[BaseLearnerModel | None] = [None] * len(ensemble_specs)
    for i in order:
        spec = ensemble_specs[i]
        started = time.perf_counter()
        models[i] = learners.fit(spec, fit_matrix,
                                 child_seed(seed, "base", spec.algorithm, i), shared)
        logger.info("fitted %s in %.2fs", spec.label(), time.perf_counter() - started)

    val_matrix = validation.features[:, indices]
    val_scores = np.column_stack([m.score(val_matrix) for m in models])
    val_labels = validation.binary_labels()
    decisions = [fit_best_mcc(val_scores[:, j], val_labels)
                 for j in range(len(models))]
    bins = np.stack([decisions[j].classify(val_scores[:, j])
                     for j in range(len(models))])
    reputation = reputation_from_validation(bins, val_labels)
    train_scores = np.column_stack([m.score(base_train) for m in models])
    return BaseLayer(stats, indices, models, decisions, reputation,
                     train_scores, val_scores)


def _matrices_for_kind(split: SplitDataset, layer: BaseLayer, kind: str,
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, list[str]]:
    stats = layer.stats
    train = split.train.replace(features=apply_normalization(split.train.features, stats))
    validation = split.validation.replace(
        features=apply_normalization(split.validation.features, stats))
    X_train, y_train, names = assemble_matrix(
        train, layer.models, layer.decisions, layer.reputation, kind,
        precomputed_scores=layer.train_scores if kind != DATA_F else None)
    X_val, y_val, _ = assemble_matrix(
        validation, layer.models, layer.decisions, layer.reputation, kind,
        precomputed_scores=layer.validation_scores if kind != DATA_F else None)
    return X_train, y_train, X_val, y_val, names


def fit_stacker(split: SplitDataset, ensemble_specs: list[AlgorithmSpec] | None = None,
                meta_grid: list[MetaClassifierSpec] | None = None,
                feature_set_kind: str = FULL_F, seed: int = 0,
                workers: int = 1, base_sample_fraction: float = 1.0,
                feature_policy: str = "none", top_k: int | None = None,
                layer: BaseLayer | None = None) -> StackerModel:
    """Fit the full two-layer stacker on one split."""
    if ensemble_specs is None:
        ensemble_specs = learners.default_ensemble_specs(split.train.n_features)
    if meta_grid is None:
        meta_grid = default_meta_grid(child_seed(seed, "meta"))
    if layer is None:
        layer = fit_base_layer(split, ensemble_specs, seed, base_sample_fraction,
                               feature_policy, top_k)
    X_train, y_train, X_val, y_val, names = _matrices_for_kind(
        split, layer, feature_set_kind)
    tuning = tune_meta(meta_grid, X_train, y_train, X_val, y_val, workers)
    meta_spec = meta_grid[tuning.chosen_index]
    meta_model = tuning.chosen_model

    return StackerModel(
        dataset_name=split.train.name,
        excluded_attack=split.excluded_attack,
        feature_set_kind=feature_set_kind,
        feature_names=split.train.schema.feature_names,
        normal_value=split.train.schema.normal_value,
        stats=layer.stats,
        feature_indices=list(layer.feature_indices),
        ensemble=list(zip(layer.models, layer.decisions)),
        reputation=layer.reputation,
        meta_spec=meta_spec,
        meta=meta_model,
        columns=names,
        provenance={
            "seed": seed,
            "ensemble": [s.to_json() for s in ensemble_specs],
            "meta_tuning": tuning.table_rows(),
            "chosen_meta": meta_spec.to_json(),
            "variant": split.excluded_attack,
            "columns_hash": columns_digest(names),
        },
    )


def _point_matrix(points) -> np.ndarray:
    if isinstance(points, Dataset):
        return points.features
    return np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)


def _model_matrix(model: StackerModel, points) -> tuple[np.ndarray, np.ndarray]:
    features = _point_matrix(points)
    if features.shape[1] != len(model.feature_names):
        raise ValueError("point arity does not match the model schema")
    normalized = apply_normalization(features, model.stats)
    selected = normalized[:, model.feature_indices]
    scores = np.column_stack([m.score(selected) for m, _ in model.ensemble])
    X, names = assemble_features(
        normalized, model.feature_names, [m for m, _ in model.ensemble],
        [d for _, d in model.ensemble], model.reputation,
        model.feature_set_kind, precomputed_scores=scores)
    if columns_digest(names) != model.columns_hash:
        raise ValueError("assembled column layout differs from the trained layout")
    return X, scores


def predict_stacker(model: StackerModel, points,
                    ) -> tuple[np.ndarray, np.ndarray, list[MetaFeatureRow]]:
    """Classify points (a Dataset or a bare feature matrix), returning
    verdicts, anomaly scores and explainability rows."""
    if len(_point_matrix(points)) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0), []
    X, raw_scores = _model_matrix(model, points)
    preds, scores = model.meta.predict(X)
    algorithms = [m.spec.label() for m, _ in model.ensemble]
    bins = np.column_stack([
        d.classify(raw_scores[:, j]) for j, (_, d) in enumerate(model.ensemble)
    ])
    signs = np.where(bins == 1, -1.0, 1.0)
    wcounts = (0.5 * (1.0 - signs * model.reputation.values)).mean(axis=1)
    rows = [
        MetaFeatureRow(
            numeric={a: float(raw_scores[r, j]) for j, a in enumerate(algorithms)},
            binary={a: int(bins[r, j]) for j, a in enumerate(algorithms)},
            count=int(bins[r].sum()),
            wcount=float(wcounts[r]),
        )
        for r in range(len(X))
    ]
    return preds, scores, rows


def benchmark_prediction(model: StackerModel, points: Dataset) -> dict:
    """Per-component scoring time; the parallel-ideal bound is
    max(base learners) + meta-level."""
    normalized = apply_normalization(points.features, model.stats)
    selected = normalized[:, model.feature_indices]
    timings = {}
    for m, _ in model.ensemble:
        start = time.perf_counter()
        m.score(selected)
        timings[m.spec.label()] = time.perf_counter() - start
    start = time.perf_counter()
    predict_stacker(model, points)
    total = time.perf_counter() - start
    slowest = max(timings.values())
    return {
        "n_points": len(points),
        "base_seconds": timings,
        "slowest_base_seconds": slowest,
        "total_seconds": total,
        "parallel_bound_seconds": slowest + max(total - sum(timings.values()), 0.0),
    }


@dataclass(frozen=True)
class ComparisonRun:
    """Table-style comparison of the four classifier groups on one split."""

    dataset: str
    excluded_attack: str | None
    unknown_fraction: float
    reports: dict[str, MetricReport]
    chosen: dict[str, str]

    GROUPS = ("Sup-DataF", "Stacker-MetaF", "Stacker-FullF", "Unsup-DataF")


def run_comparison(split: SplitDataset,
                   ensemble_specs: list[AlgorithmSpec] | None = None,
                   meta_grid: list[MetaClassifierSpec] | None = None,
                   seed: int = 0, workers: int = 1,
                   base_sample_fraction: float = 1.0,
                   feature_policy: str = "none", top_k: int | None = None,
                   ) -> ComparisonRun:
    """Evaluate Sup-DataF, Stacker-MetaF, Stacker-FullF and Unsup-DataF on
    the same test partition.

    The supervised baseline tunes over the meta grid on dataset features;
    the stackers share one fitted base layer and re-tune the meta-level per
    feature set; the unsupervised baseline is the ensemble member with the
    best validation MCC.
    """
    if ensemble_specs is None:
        ensemble_specs = learners.default_ensemble_specs(split.train.n_features)
    if meta_grid is None:
        meta_grid = default_meta_grid(child_seed(seed, "meta"))
    layer = fit_base_layer(split, ensemble_specs, seed, base_sample_fraction,
                           feature_policy, top_k)
    test = split.test
    test_categories = np.asarray(test.labels, dtype=object)
    y_test = test.binary_labels()
    reports: dict[str, MetricReport] = {}
    chosen: dict[str, str] = {}

    # supervised baseline on plain dataset features
    X_train, y_train, X_val, y_val, _ = _matrices_for_kind(split, layer, DATA_F)
    sup_tuning = tune_meta(meta_grid, X_train, y_train, X_val, y_val, workers)
    sup_model = sup_tuning.chosen_model
    X_test = apply_normalization(test.features, layer.stats)
    sup_preds, sup_scores = sup_model.predict(X_test)
    chosen["Sup-DataF"] = sup_tuning.chosen_label
    reports["Sup-DataF"] = report(
        sup_preds, sup_scores, y_test, test_categories, split.excluded_attack,
        dataset=split.train.name, variant=split.excluded_attack,
        classifier=f"Sup-DataF/{sup_tuning.chosen_label}")

    # the two stackers share the fitted base layer
    for kind in (META_F, FULL_F):
        stacker = fit_stacker(split, ensemble_specs, meta_grid, kind, seed,
                              workers, layer=layer)
        preds, scores, _ = predict_stacker(stacker, test)
        group = f"Stacker-{kind}"
        chosen[group] = stacker.meta_spec.label()
        reports[group] = report(
            preds, scores, y_test, test_categories, split.excluded_attack,
            dataset=split.train.name, variant=split.excluded_attack,
            classifier=f"{group}/{stacker.meta_spec.label()}")

    # best single unsupervised learner, judged by validation MCC
    best_j = int(np.argmax(layer.reputation.values))
    unsup_model = layer.models[best_j]
    unsup_scores = unsup_model.score(X_test[:, layer.feature_indices])
    unsup_preds = layer.decisions[best_j].classify(unsup_scores)
    chosen["Unsup-DataF"] = unsup_model.spec.label()
    reports["Unsup-DataF"] = report(
        unsup_preds, unsup_scores, y_test, with_recall_unk=False,
        dataset=split.train.name, variant=split.excluded_attack,
        classifier=f"Unsup-DataF/{unsup_model.spec.label()}")

    return ComparisonRun(
        dataset=split.train.name,
        excluded_attack=split.excluded_attack,
        unknown_fraction=split.unknown_fraction(),
        reports=reports,
        chosen=chosen,
    )


def save_stacker(model: StackerModel, path) -> None:
    writer = ArchiveWriter(MODEL_FORMAT_VERSION)
    ensemble_meta = []
    for learner, decision in model.ensemble:
        arrays = {name: writer.add_array(arr)
                  for name, arr in learner.payload_arrays().items()}
        ensemble_meta.append({
            "spec": learner.spec.to_json(),
            "scalars": learner.payload_scalars(),
            "arrays": arrays,
            "decision": decision.to_json(),
        })
    meta_arrays = {name: writer.add_array(arr)
                   for name, arr in model.meta.payload_arrays().items()}
    writer.write(path, {
        "dataset_name": model.dataset_name,
        "excluded_attack": model.excluded_attack,
        "feature_set_kind": model.feature_set_kind,
        "feature_names": list(model.feature_names),
        "normal_value": model.normal_value,
        "stats_min": writer.add_array(model.stats.minimum),
        "stats_max": writer.add_array(model.stats.maximum),
        "feature_indices": list(map(int, model.feature_indices)),
        "ensemble": ensemble_meta,
        "reputation": writer.add_array(model.reputation.values),
        "meta_spec": model.meta_spec.to_json(),
        "meta_scalars": model.meta.payload_scalars(),
        "meta_arrays": meta_arrays,
        "columns": model.columns,
        "columns_hash": model.columns_hash,
        "provenance": model.provenance,
    })


def load_stacker(path) -> StackerModel:
    reader = ArchiveReader(path, MODEL_FORMAT_VERSION)
    meta = reader.metadata
    ensemble = []
    for entry in meta["ensemble"]:
        spec = AlgorithmSpec.from_json(entry["spec"])
        arrays = {name: reader.array(ref) for name, ref in entry["arrays"].items()}
        learner = model_from_payload(spec, entry["scalars"], arrays)
        ensemble.append((learner, DecisionFunction.from_json(entry["decision"])))
    meta_spec = MetaClassifierSpec.from_json(meta["meta_spec"])
    meta_model = meta_model_from_payload(
        meta_spec, meta["meta_scalars"],
        {name: reader.array(ref) for name, ref in meta["meta_arrays"].items()})
    model = StackerModel(
        dataset_name=meta["dataset_name"],
        excluded_attack=meta["excluded_attack"],
        feature_set_kind=meta["feature_set_kind"],
        feature_names=tuple(meta["feature_names"]),
        normal_value=meta["normal_value"],
        stats=NormalizationStats(reader.array(meta["stats_min"]),
                                 reader.array(meta["stats_max"])),
        feature_indices=list(meta["feature_indices"]),
        ensemble=ensemble,
        reputation=ReputationVector(reader.array(meta["reputation"])),
        meta_spec=meta_spec,
        meta=meta_model,
        columns=list(meta["columns"]),
        provenance=meta["provenance"],
    )
    if model.columns_hash != meta["columns_hash"]:
        raise ValueError("column layout hash mismatch in loaded model")
    return model
