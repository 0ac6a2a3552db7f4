"""Confusion-matrix metrics for binary intrusion detection, attack = positive."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(predictions, labels) -> ConfusionMatrix:
    preds = np.asarray(predictions, dtype=np.int64)
    labs = np.asarray(labels, dtype=np.int64)
    if preds.shape != labs.shape or preds.ndim != 1 or len(preds) == 0:
        raise ValueError("predictions and labels must be equal-length 1-D vectors")
    return ConfusionMatrix(
        tp=int(np.sum((preds == 1) & (labs == 1))),
        tn=int(np.sum((preds == 0) & (labs == 0))),
        fp=int(np.sum((preds == 1) & (labs == 0))),
        fn=int(np.sum((preds == 0) & (labs == 1))),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    return (cm.tp + cm.tn) / cm.total


def misclassification_rate(cm: ConfusionMatrix) -> float:
    return 1.0 - accuracy(cm)


def precision(cm: ConfusionMatrix) -> float:
    denom = cm.tp + cm.fp
    return cm.tp / denom if denom else 0.0


def recall(cm: ConfusionMatrix) -> float:
    denom = cm.tp + cm.fn
    return cm.tp / denom if denom else 0.0


def false_positive_rate(cm: ConfusionMatrix) -> float:
    denom = cm.fp + cm.tn
    return cm.fp / denom if denom else 0.0


def f1_score(cm: ConfusionMatrix) -> float:
    p, r = precision(cm), recall(cm)
    return 2.0 * p * r / (p + r) if p + r else 0.0


def matthews_corrcoef(cm: ConfusionMatrix) -> float:
    """MCC with the random-guess convention: any zero factor yields 0."""
    factors = [cm.tp + cm.fp, cm.tp + cm.fn, cm.tn + cm.fp, cm.tn + cm.fn]
    if 0 in factors:
        return 0.0
    num = cm.tp * cm.tn - cm.fp * cm.fn
    return num / math.sqrt(math.prod(float(f) for f in factors))


def recall_unknown(predictions, labels_categories, excluded_attack: str) -> float | None:
    """Recall restricted to points of the category excluded from training.

    Returns None when the test slice holds no such points.
    """
    preds = np.asarray(predictions, dtype=np.int64)
    cats = np.asarray(labels_categories, dtype=object)
    mask = cats == excluded_attack
    if not mask.any():
        return None
    return float(preds[mask].mean())


def auc_score(scores, labels) -> float | None:
    """Rank-based (Mann-Whitney) AUC with midrank tie handling.

    Returns None when only one class is present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labs = np.asarray(labels, dtype=np.int64)
    n_pos = int(labs.sum())
    n_neg = len(labs) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    rank_sum = ranks[labs == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass(frozen=True)
class MetricReport:
    dataset: str
    variant: str | None
    classifier: str
    cm: ConfusionMatrix
    misc: float
    acc: float
    mcc: float
    precision: float
    recall: float
    f1: float
    fpr: float
    auc: float | None
    recall_unk: float | None

    def __post_init__(self) -> None:
        assert self.misc == 1.0 - self.acc, "misc must equal 1 - acc exactly"

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "variant": self.variant,
            "classifier": self.classifier,
            "tp": self.cm.tp, "tn": self.cm.tn, "fp": self.cm.fp, "fn": self.cm.fn,
            "misc": self.misc, "acc": self.acc, "mcc": self.mcc,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "fpr": self.fpr, "auc": self.auc, "recall_unk": self.recall_unk,
        }


def report(predictions, scores, binary_labels, label_categories=None,
           excluded_attack: str | None = None, dataset: str = "",
           variant: str | None = None, classifier: str = "",
           with_recall_unk: bool = True) -> MetricReport:
    """Assemble every reported metric from one prediction run.

    recall_unk is present only when an excluded attack applies and the
    caller did not opt out (unsupervised reports never carry it).
    """
    cm = confusion(predictions, binary_labels)
    acc = accuracy(cm)
    r_unk = None
    if with_recall_unk and excluded_attack is not None and label_categories is not None:
        r_unk = recall_unknown(predictions, label_categories, excluded_attack)
    return MetricReport(
        dataset=dataset,
        variant=variant,
        classifier=classifier,
        cm=cm,
        misc=1.0 - acc,
        acc=acc,
        mcc=matthews_corrcoef(cm),
        precision=precision(cm),
        recall=recall(cm),
        f1=f1_score(cm),
        fpr=false_positive_rate(cm),
        auc=auc_score(scores, binary_labels) if scores is not None else None,
        recall_unk=r_unk,
    )
