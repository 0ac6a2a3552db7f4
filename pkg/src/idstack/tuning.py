"""Grid search over base-learner and meta-level parameters by validation MCC."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import learners
from .dataset import Dataset
from .decision import DecisionFunction, fit_best_mcc, fit_iqr
from .learners import AlgorithmSpec, SharedFitContext, dbscan_eps_for
from .metalevel import MetaClassifierModel, MetaClassifierSpec, fit_meta
from .metrics import confusion, matthews_corrcoef
from .util import child_seed

logger = logging.getLogger(__name__)

NEIGHBOR_STYLE_VALUES = (1, 2, 3, 5, 10, 20, 50, 100, 200, 500)
SDO_Q_VALUES = (0.05, 0.1, 0.2, 0.5)
DBSCAN_MIN_PTS = (1, 2, 3, 5, 10)
DBSCAN_EPS_RAW = (100, 200, 500, 1000)
# the published grids leave cluster counts and SOM shapes open; these are ours
CLUSTER_COUNT_VALUES = (2, 3, 5, 10, 20, 50)
SOM_SHAPE_VALUES = ((5, 16), (10, 36), (20, 64))


def base_grid_for(algorithm: str, n_features: int,
                  eps_in_normalized_units: bool = True) -> list[AlgorithmSpec]:
    """Candidate specs for one algorithm, in tie-breaking order."""
    if algorithm in ("KNN", "ODIN", "LOF", "COF", "FastABOD"):
        return [AlgorithmSpec(algorithm, {"k": k}) for k in NEIGHBOR_STYLE_VALUES]
    if algorithm == "HBOS":
        return [AlgorithmSpec(algorithm, {"b": b}) for b in NEIGHBOR_STYLE_VALUES]
    if algorithm == "IForest":
        return [AlgorithmSpec(algorithm, {"t": t, "s": s})
                for t in NEIGHBOR_STYLE_VALUES for s in NEIGHBOR_STYLE_VALUES
                if s >= 2]
    if algorithm == "SDO":
        return [AlgorithmSpec(algorithm, {"obs": obs, "q": q})
                for obs in NEIGHBOR_STYLE_VALUES for q in SDO_Q_VALUES]
    if algorithm == "DBSCAN":
        out = []
        for min_pts in DBSCAN_MIN_PTS:
            for eps in DBSCAN_EPS_RAW:
                value = dbscan_eps_for(n_features, eps) if eps_in_normalized_units else eps
                out.append(AlgorithmSpec(algorithm, {"minPts": min_pts, "eps": value}))
        return out
    if algorithm in ("KMeans", "LDCOF"):
        return [AlgorithmSpec(algorithm, {"c": c}) for c in CLUSTER_COUNT_VALUES]
    if algorithm == "GMeans":
        return [AlgorithmSpec(algorithm, {})]
    if algorithm == "SOM":
        return [AlgorithmSpec(algorithm, {"e": e, "x": x}) for e, x in SOM_SHAPE_VALUES]
    raise ValueError(f"unknown algorithm {algorithm!r}")


def clamp_candidates(candidates: list[AlgorithmSpec], n_train: int) -> list[AlgorithmSpec]:
    """Clamp infeasible neighbor-style values to the train size, then dedup."""
    seen = set()
    out = []
    for spec in candidates:
        params = dict(spec.params)
        for name in ("k",):
            if name in params and params[name] >= n_train:
                params[name] = max(n_train - 1, 1)
        for name in ("s", "obs", "c"):
            if name in params and params[name] > n_train:
                params[name] = n_train
        clamped = AlgorithmSpec(spec.algorithm, params)
        key = tuple(sorted(clamped.params.items()))
        if key not in seen:
            seen.add(key)
            out.append(clamped)
    return out


@dataclass(frozen=True)
class CandidateResult:
    label: str
    mcc: float
    seconds: float  # wall clock, reporting only; never part of tie-breaking


@dataclass(frozen=True)
class TuningResult:
    chosen_index: int
    chosen_label: str
    chosen_mcc: float
    table: tuple[CandidateResult, ...]
    chosen_model: object = field(compare=False, default=None)
    chosen_decision: DecisionFunction | None = None

    def table_rows(self) -> list[dict]:
        return [{"candidate": r.label, "mcc": r.mcc} for r in self.table]


def _forbid_test(*parts: Dataset) -> None:
    for part in parts:
        if isinstance(part, Dataset) and part.partition_tag == "test":
            raise ValueError("tuning must not touch the test partition")


def _argmax(mccs: list[float]) -> int:
    best = 0
    for i in range(1, len(mccs)):
        if mccs[i] > mccs[best]:  # strict: ties keep the earlier candidate
            best = i
    return best


def tune_base(algorithm: str, candidates: list[AlgorithmSpec], train: Dataset,
              validation: Dataset, seed: int, repeats: int = 1,
              workers: int = 1) -> TuningResult:
    """Pick the candidate whose fitted detector best separates validation.

    Each candidate is fitted on train (labels unused), thresholded with the
    best-MCC decision rule on validation, and judged by that MCC. With
    repeats > 1 the MCC is averaged over independently seeded fits and the
    model of the first repeat is kept.
    """
    _forbid_test(train, validation)
    if not candidates:
        raise ValueError("empty candidate grid")
    candidates = clamp_candidates(candidates, len(train))
    val_labels = validation.binary_labels()
    single_class = len(np.unique(val_labels)) < 2

    def evaluate(i: int):
        start = time.perf_counter()
        spec = candidates[i]
        mccs = []
        first_model = None
        first_decision = None
        for r in range(repeats):
            model = learners.fit(spec, train, child_seed(seed, "tune", algorithm, i, r),
                                 SharedFitContext())
            scores = model.score(validation.features)
            if single_class:
                decision = fit_iqr(model.score(train.features)) if len(train) >= 4 \
                    else fit_best_mcc(scores, val_labels)
                mcc = 0.0
            else:
                decision = fit_best_mcc(scores, val_labels)
                mcc = matthews_corrcoef(confusion(decision.classify(scores), val_labels))
            mccs.append(mcc)
            if r == 0:
                first_model = model
                first_decision = decision
        return float(np.mean(mccs)), first_model, first_decision, time.perf_counter() - start

    if single_class:
        logger.warning("%s tuning: single-class validation; defaulting to the "
                       "first candidate with an IQR threshold", algorithm)
    results = _run_candidates(evaluate, len(candidates), workers)
    mccs = [r[0] for r in results]
    best = _argmax(mccs)
    table = tuple(CandidateResult(candidates[i].label(), mccs[i], results[i][3])
                  for i in range(len(candidates)))
    return TuningResult(best, candidates[best].label(), mccs[best], table,
                        chosen_model=results[best][1],
                        chosen_decision=results[best][2])


def tune_meta(candidates: list[MetaClassifierSpec], train_matrix, train_labels,
              val_matrix, val_labels, workers: int = 1) -> TuningResult:
    """Grid search over supervised meta-level classifiers by validation MCC."""
    if not candidates:
        raise ValueError("empty candidate grid")
    y_train = np.asarray(train_labels, dtype=np.int64)
    y_val = np.asarray(val_labels, dtype=np.int64)

    def evaluate(i: int):
        start = time.perf_counter()
        model = fit_meta(candidates[i], train_matrix, y_train)
        preds, _ = model.predict(val_matrix)
        mcc = matthews_corrcoef(confusion(preds, y_val))
        return mcc, model, None, time.perf_counter() - start

    results = _run_candidates(evaluate, len(candidates), workers)
    mccs = [r[0] for r in results]
    best = _argmax(mccs)
    table = tuple(CandidateResult(candidates[i].label(), mccs[i], results[i][3])
                  for i in range(len(candidates)))
    return TuningResult(best, candidates[best].label(), mccs[best], table,
                        chosen_model=results[best][1])


def _run_candidates(evaluate, n: int, workers: int) -> list:
    if workers <= 1 or n <= 1:
        return [evaluate(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(evaluate, range(n)))
