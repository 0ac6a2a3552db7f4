"""Model-based meta-features: per-learner scores, votes and voting counters.

For an ensemble of uk learners each point yields uk numeric scores, uk
binary votes, the plain vote count and a reputation-weighted count in
[0, 1]. Reputation is each learner's validation MCC.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .decision import DecisionFunction
from .learners import BaseLearnerModel
from .metrics import confusion, matthews_corrcoef
from .util import OpCounter

logger = logging.getLogger(__name__)

DATA_F = "DataF"
META_F = "MetaF"
FULL_F = "FullF"
FEATURE_SET_KINDS = (DATA_F, META_F, FULL_F)


@dataclass(frozen=True)
class ReputationVector:
    values: np.ndarray  # one MCC per learner, aligned with ensemble order

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if np.any(vals < -1.0) or np.any(vals > 1.0):
            raise ValueError("reputation values must lie in [-1, 1]")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class MetaFeatureRow:
    """Per-point explainability record: what each base learner said."""

    numeric: dict[str, float]
    binary: dict[str, int]
    count: int
    wcount: float


def count_votes(bins) -> int:
    bins = np.asarray(bins, dtype=np.int64)
    if bins.size == 0:
        raise ValueError("vote count needs at least one vote")
    return int(bins.sum())


def wcount_votes(bins, rep: ReputationVector) -> float:
    """Reputation-weighted vote share.

    Each learner contributes (1 - (-1)^bin * rep)/2: a vote from a trusted
    learner pushes toward 1, a trusted learner staying silent pushes toward
    0, and zero reputation always contributes 1/2.
    """
    bins = np.asarray(bins, dtype=np.int64)
    if len(bins) != len(rep):
        raise ValueError("votes and reputation must have equal length")
    signs = np.where(bins == 1, -1.0, 1.0)  # (-1)^bin
    terms = 0.5 * (1.0 - signs * rep.values)
    return float(terms.mean())


def reputation_from_validation(bin_predictions: np.ndarray,
                               labels) -> ReputationVector:
    """Per-learner MCC on the validation slice.

    `bin_predictions` has one row per learner. A single-class validation
    slice gives every learner the random-guess reputation of 0.
    """
    labels = np.asarray(labels, dtype=np.int64)
    preds = np.atleast_2d(np.asarray(bin_predictions, dtype=np.int64))
    if len(np.unique(labels)) < 2:
        logger.warning("single-class validation; all reputations set to 0")
        return ReputationVector(np.zeros(len(preds)))
    values = np.array([
        matthews_corrcoef(confusion(row, labels)) for row in preds
    ])
    return ReputationVector(values)


def column_names(feature_names, algorithms, kind: str) -> list[str]:
    data_cols = list(feature_names)
    meta_cols = ([f"{a}.num" for a in algorithms]
                 + [f"{a}.bin" for a in algorithms]
                 + ["count", "wcount"])
    if kind == DATA_F:
        return data_cols
    if kind == META_F:
        return meta_cols
    if kind == FULL_F:
        return data_cols + meta_cols
    raise ValueError(f"unknown feature-set kind {kind!r}")


def assemble_features(features: np.ndarray,
                      feature_names,
                      models: list[BaseLearnerModel],
                      decisions: list[DecisionFunction],
                      reputation: ReputationVector,
                      kind: str,
                      counter: OpCounter | None = None,
                      precomputed_scores: np.ndarray | None = None,
                      ) -> tuple[np.ndarray, list[str]]:
    """Label-free matrix assembly; the core of `assemble_matrix` and of
    prediction, where no labels exist."""
    if not (len(models) == len(decisions) == len(reputation)):
        raise ValueError("models, decisions and reputation must align")
    algorithms = [m.spec.label() for m in models]
    names = column_names(feature_names, algorithms, kind)

    if kind == DATA_F:
        return features.copy(), names

    if precomputed_scores is None:
        nums = np.column_stack([m.score(features, counter) for m in models])
    else:
        nums = precomputed_scores
        if nums.shape != (len(features), len(models)):
            raise ValueError("precomputed scores have the wrong shape")
    bins = np.column_stack([
        d.classify(nums[:, j]) for j, d in enumerate(decisions)
    ])
    counts = bins.sum(axis=1)
    signs = np.where(bins == 1, -1.0, 1.0)
    wcounts = (0.5 * (1.0 - signs * reputation.values)).mean(axis=1)
    meta = np.column_stack([nums, bins.astype(np.float64),
                            counts.astype(np.float64), wcounts])
    if kind == META_F:
        return meta, names
    return np.column_stack([features, meta]), names


def assemble_matrix(points: Dataset,
                    models: list[BaseLearnerModel],
                    decisions: list[DecisionFunction],
                    reputation: ReputationVector,
                    kind: str,
                    counter: OpCounter | None = None,
                    precomputed_scores: np.ndarray | None = None,
                    ) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Build the feature matrix of the requested kind plus binary labels.

    Column order is fixed: dataset features, then per-learner numeric
    scores, per-learner votes, count, wcount, filtered by kind. Ensemble
    order must match between models, decisions and reputation.
    """
    matrix, names = assemble_features(points.features,
                                      points.schema.feature_names, models,
                                      decisions, reputation, kind, counter,
                                      precomputed_scores)
    return matrix, points.binary_labels(), names


def meta_rows_from_matrix(matrix: np.ndarray, algorithms: list[str],
                          n_data_features: int) -> list[MetaFeatureRow]:
    """Recover per-point explainability rows from a FullF/MetaF matrix."""
    uk = len(algorithms)
    offset = matrix.shape[1] - (2 * uk + 2)
    rows = []
    for r in range(len(matrix)):
        nums = {a: float(matrix[r, offset + j]) for j, a in enumerate(algorithms)}
        bins = {a: int(matrix[r, offset + uk + j]) for j, a in enumerate(algorithms)}
        rows.append(MetaFeatureRow(
            numeric=nums,
            binary=bins,
            count=int(matrix[r, offset + 2 * uk]),
            wcount=float(matrix[r, offset + 2 * uk + 1]),
        ))
    return rows
