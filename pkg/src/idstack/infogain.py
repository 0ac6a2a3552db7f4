"""Information-gain feature ranking over the binary normal/attack view."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DataError, Dataset

DEFAULT_BINS = 10


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def information_gain_values(values: np.ndarray, binary_labels: np.ndarray,
                            bins: int = DEFAULT_BINS) -> float:
    """IG of one feature column against binary labels, in bits.

    The feature is discretized into `bins` equal-width intervals over its
    observed [min, max]; a constant column carries zero information.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(binary_labels, dtype=np.int64)
    if len(values) == 0:
        raise DataError("cannot compute information gain on an empty dataset")
    lo, hi = values.min(), values.max()
    label_counts = np.bincount(labels, minlength=2)
    h_label = _entropy(label_counts)
    if hi == lo or h_label == 0.0:
        return 0.0
    # rightmost edge inclusive so the max value lands in the last bin
    bin_of = np.minimum(((values - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
    n = len(values)
    conditional = 0.0
    for b in range(bins):
        mask = bin_of == b
        nb = int(mask.sum())
        if nb == 0:
            continue
        conditional += (nb / n) * _entropy(np.bincount(labels[mask], minlength=2))
    ig = h_label - conditional
    return float(min(max(ig, 0.0), h_label))


def information_gain(dataset: Dataset, feature_index: int,
                     bins: int = DEFAULT_BINS) -> float:
    return information_gain_values(dataset.features[:, feature_index],
                                   dataset.binary_labels(), bins)


def rank_columns(matrix: np.ndarray, binary_labels: np.ndarray,
                 bins: int = DEFAULT_BINS) -> np.ndarray:
    """Per-column IG for an arbitrary feature matrix."""
    return np.array([
        information_gain_values(matrix[:, j], binary_labels, bins)
        for j in range(matrix.shape[1])
    ])


def select_features(dataset: Dataset, policy: str = "above_mean",
                    k: int | None = None, bins: int = DEFAULT_BINS) -> list[int]:
    """Rank features by IG and keep the informative ones.

    policy "top_k" keeps the k best; "above_mean" keeps features whose IG
    is strictly above the mean IG, falling back to all features when every
    IG is zero. Ties order by ascending feature index.
    """
    gains = rank_columns(dataset.features, dataset.binary_labels(), bins)
    order = sorted(range(len(gains)), key=lambda j: (-gains[j], j))
    if policy == "top_k":
        if k is None or k < 1:
            raise ValueError("top_k policy requires k >= 1")
        return order[:k]
    if policy == "above_mean":
        if np.all(gains == 0.0):
            return list(range(len(gains)))
        mean = gains.mean()
        return [j for j in order if gains[j] > mean]
    if policy == "none":
        return list(range(len(gains)))
    raise ValueError(f"unknown feature-selection policy {policy!r}")


@dataclass(frozen=True)
class FeatureSetGains:
    kind: str
    n_features: int
    gains_by_column: dict[str, float]

    def best_average(self, top: int) -> float:
        ranked = sorted(self.gains_by_column.values(), reverse=True)
        head = ranked[: min(top, len(ranked))]
        return float(np.mean(head)) if head else 0.0


def gains_report(per_kind: dict[str, tuple[np.ndarray, list[str], np.ndarray]],
                 bins: int = DEFAULT_BINS) -> list[FeatureSetGains]:
    """Build the best-1/3/5/10 IG summary input for each feature-set kind.

    `per_kind` maps kind name to (matrix, column names, binary labels).
    """
    out = []
    for kind, (matrix, names, labels) in per_kind.items():
        gains = rank_columns(matrix, labels, bins)
        out.append(FeatureSetGains(
            kind=kind,
            n_features=matrix.shape[1],
            gains_by_column={name: float(g) for name, g in zip(names, gains)},
        ))
    return out
