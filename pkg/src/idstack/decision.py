"""Decision functions turning numeric anomaly scores into binary verdicts.

Every fitted decision function collapses to a single threshold; a point is
flagged anomalous exactly when its score is strictly above it, so a learner
emitting one constant score flags nothing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

IQR_DEFAULT_MULTIPLIER = 1.5


@dataclass(frozen=True)
class DecisionFunction:
    kind: str  # "fixed", "iqr" or "best_mcc"
    threshold: float
    multiplier: float | None = None

    def classify(self, scores) -> np.ndarray:
        return (np.asarray(scores, dtype=np.float64) > self.threshold).astype(np.int64)

    def to_json(self) -> dict:
        return {"kind": self.kind, "threshold": self.threshold,
                "multiplier": self.multiplier}

    @staticmethod
    def from_json(obj: dict) -> "DecisionFunction":
        return DecisionFunction(obj["kind"], obj["threshold"], obj.get("multiplier"))


def fixed_threshold(theta: float) -> DecisionFunction:
    return DecisionFunction("fixed", float(theta))


def fit_iqr(train_scores, multiplier: float = IQR_DEFAULT_MULTIPLIER) -> DecisionFunction:
    """Threshold at Q3 + m * IQR with linearly interpolated quartiles."""
    scores = np.asarray(train_scores, dtype=np.float64)
    if len(scores) < 4:
        raise ValueError("IQR fitting needs at least 4 scores")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    q1, q3 = np.percentile(scores, [25, 75])
    if q3 == q1 and np.all(scores == scores[0]):
        logger.warning("all scores identical (%.6g); threshold set to that value",
                       scores[0])
        return DecisionFunction("iqr", float(scores[0]), float(multiplier))
    return DecisionFunction("iqr", float(q3 + multiplier * (q3 - q1)), float(multiplier))


def fit_best_mcc(validation_scores, validation_labels) -> DecisionFunction:
    """Threshold maximizing validation MCC over all candidate midpoints.

    Candidates are the midpoints between consecutive sorted unique scores;
    ties prefer the smaller threshold, which favors recall. Falls back to
    the IQR rule when validation holds a single class.
    """
    from .metrics import matthews_corrcoef

    scores = np.asarray(validation_scores, dtype=np.float64)
    labels = np.asarray(validation_labels, dtype=np.int64)
    if len(scores) != len(labels):
        raise ValueError("scores and labels must align")
    if len(np.unique(labels)) < 2:
        logger.warning("single-class validation; falling back to the IQR decision rule")
        fb = fit_iqr(scores) if len(scores) >= 4 else fixed_threshold(scores.max())
        return DecisionFunction("best_mcc", fb.threshold, None)

    uniq = np.unique(scores)
    if len(uniq) == 1:
        return DecisionFunction("best_mcc", float(uniq[0]), None)
    candidates = (uniq[:-1] + uniq[1:]) / 2.0
    best_theta = candidates[0]
    best_mcc = -np.inf
    for theta in candidates:
        mcc = matthews_corrcoef_for(scores > theta, labels)
        if mcc > best_mcc:
            best_mcc = mcc
            best_theta = theta
    return DecisionFunction("best_mcc", float(best_theta), None)


def matthews_corrcoef_for(predictions, labels) -> float:
    from .metrics import confusion, matthews_corrcoef

    return matthews_corrcoef(confusion(np.asarray(predictions, dtype=np.int64), labels))
