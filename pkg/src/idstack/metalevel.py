"""Supervised meta-level classifiers: decision tree, random forest, k-NN
and Gaussian naive Bayes, all built here so fitted models serialize as
explicit trees and stats tables.

Every model emits an anomaly score in [0, 1]; the binary verdict is
score > 0.5, with the tie resolving to normal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .neighbors import NeighborIndex
from .util import rng_for

logger = logging.getLogger(__name__)

META_KINDS = ("DecisionTree", "RandomForest", "KNN", "GaussianNB")
GNB_VARIANCE_FLOOR = 1e-9


@dataclass(frozen=True)
class MetaClassifierSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in META_KINDS:
            raise ValueError(f"unknown meta-level classifier {self.kind!r}")

    def label(self) -> str:
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({inner})"

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}

    @staticmethod
    def from_json(obj: dict) -> "MetaClassifierSpec":
        return MetaClassifierSpec(obj["kind"], dict(obj["params"]), obj["seed"])


class MetaClassifierModel:
    def __init__(self, spec: MetaClassifierSpec, n_features: int) -> None:
        self.spec = spec
        self.n_features = int(n_features)

    def _check(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def anomaly_scores(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        scores = self.anomaly_scores(X)
        return (scores > 0.5).astype(np.int64), scores

    def payload_scalars(self) -> dict:
        return {"n_features": self.n_features}

    def payload_arrays(self) -> dict[str, np.ndarray]:
        return {}


class ConstantModel(MetaClassifierModel):
    """Fallback when training data holds a single class."""

    def __init__(self, spec, n_features, label):
        super().__init__(spec, n_features)
        self.label = int(label)

    def anomaly_scores(self, X):
        return np.full(len(self._check(X)), float(self.label))

    def payload_scalars(self):
        return {"n_features": self.n_features, "constant_label": self.label}


def gini_best_split(X: np.ndarray, y: np.ndarray,
                    features: np.ndarray) -> tuple[float, int, float] | None:
    """Best (weighted Gini, feature, midpoint threshold) over the candidates.

    Thresholds sit halfway between consecutive distinct sorted values; rows
    with value <= threshold go left. Ties keep the earliest feature and the
    smallest threshold. Returns None when no feature admits a split.
    """
    n = len(y)
    best: tuple[float, int, float] | None = None
    for f in features:
        xs_raw = X[:, f]
        order = np.argsort(xs_raw, kind="stable")
        xs = xs_raw[order]
        ys = y[order]
        boundaries = np.flatnonzero(xs[:-1] != xs[1:])
        if len(boundaries) == 0:
            continue
        pos = np.cumsum(ys)
        n_left = boundaries + 1.0
        p_left = pos[boundaries]
        n_right = n - n_left
        p_right = pos[-1] - p_left
        g_left = 1.0 - (p_left / n_left) ** 2 - ((n_left - p_left) / n_left) ** 2
        g_right = 1.0 - (p_right / n_right) ** 2 - ((n_right - p_right) / n_right) ** 2
        weighted = (n_left * g_left + n_right * g_right) / n
        j = int(weighted.argmin())
        if best is None or weighted[j] < best[0]:
            b = boundaries[j]
            thr = float((xs[b] + xs[b + 1]) / 2.0)
            if thr >= xs[b + 1]:  # ulp-adjacent values: midpoint rounds up
                thr = float(xs[b])
            best = (float(weighted[j]), int(f), thr)
    return best


class _Tree:
    """Binary CART tree stored as flat arrays; leaves keep class-1 purity."""

    __slots__ = ("feature", "threshold", "left", "right", "purity", "is_leaf")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.purity: list[float] = []
        self.is_leaf: list[bool] = []

    def _new_node(self) -> int:
        node = len(self.feature)
        for lst in (self.feature, self.threshold, self.left, self.right,
                    self.purity, self.is_leaf):
            lst.append(0)
        return node

    def build(self, X, y, max_depth, n_candidate_features, rng):
        d = X.shape[1]
        stack = [(self._new_node(), np.arange(len(y)), 0)]
        while stack:
            node, rows, depth = stack.pop()
            ys = y[rows]
            purity = float(ys.mean())
            if purity in (0.0, 1.0) or (max_depth is not None and depth >= max_depth):
                self._leaf(node, purity)
                continue
            if n_candidate_features is None or n_candidate_features >= d:
                feats = np.arange(d)
            else:
                feats = np.sort(rng.choice(d, size=n_candidate_features, replace=False))
            split = gini_best_split(X[rows], ys, feats)
            if split is None:
                self._leaf(node, purity)
                continue
            _, f, thr = split
            go_left = X[rows, f] <= thr
            if go_left.all() or not go_left.any():
                self._leaf(node, purity)
                continue
            self.is_leaf[node] = False
            self.feature[node] = f
            self.threshold[node] = thr
            left = self._new_node()
            right = self._new_node()
            self.left[node] = left
            self.right[node] = right
            stack.append((left, rows[go_left], depth + 1))
            stack.append((right, rows[~go_left], depth + 1))

    def _leaf(self, node, purity):
        self.is_leaf[node] = True
        self.purity[node] = purity

    def finalize(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.purity = np.asarray(self.purity, dtype=np.float64)
        self.is_leaf = np.asarray(self.is_leaf, dtype=bool)

    def leaf_purity(self, X: np.ndarray) -> np.ndarray:
        cur = np.zeros(len(X), dtype=np.int64)
        active = ~self.is_leaf[cur]
        while active.any():
            nodes = cur[active]
            go_left = X[active, self.feature[nodes]] <= self.threshold[nodes]
            cur[active] = np.where(go_left, self.left[nodes], self.right[nodes])
            active = ~self.is_leaf[cur]
        return self.purity[cur]

    def arrays(self, prefix: str) -> dict[str, np.ndarray]:
        return {
            f"{prefix}_feature": self.feature,
            f"{prefix}_threshold": self.threshold,
            f"{prefix}_left": self.left,
            f"{prefix}_right": self.right,
            f"{prefix}_purity": self.purity,
            f"{prefix}_is_leaf": self.is_leaf,
        }

    @staticmethod
    def from_arrays(arrays: dict, prefix: str) -> "_Tree":
        tree = _Tree()
        tree.feature = arrays[f"{prefix}_feature"]
        tree.threshold = arrays[f"{prefix}_threshold"]
        tree.left = arrays[f"{prefix}_left"]
        tree.right = arrays[f"{prefix}_right"]
        tree.purity = arrays[f"{prefix}_purity"]
        tree.is_leaf = arrays[f"{prefix}_is_leaf"]
        return tree


class DecisionTreeModel(MetaClassifierModel):
    """Single Gini-split tree; the score is the reached leaf's purity."""

    def __init__(self, spec, n_features, tree: _Tree):
        super().__init__(spec, n_features)
        self.tree = tree

    @classmethod
    def fit(cls, spec, X, y):
        tree = _Tree()
        tree.build(X, y, spec.params.get("max_depth"), None, None)
        tree.finalize()
        return cls(spec, X.shape[1], tree)

    def anomaly_scores(self, X):
        return self.tree.leaf_purity(self._check(X))

    def payload_arrays(self):
        return self.tree.arrays("tree")

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, scalars["n_features"], _Tree.from_arrays(arrays, "tree"))


class RandomForestModel(MetaClassifierModel):
    """Bagged Gini trees with per-node sqrt(d) feature subsampling.

    The anomaly score is the fraction of trees voting attack, so adding
    duplicate trees never changes predictions.
    """

    def __init__(self, spec, n_features, trees):
        super().__init__(spec, n_features)
        self.trees = trees

    @classmethod
    def fit(cls, spec, X, y):
        n, d = X.shape
        n_trees = int(spec.params["trees"])
        max_depth = spec.params.get("max_depth")
        n_feats = int(np.ceil(np.sqrt(d)))
        trees = []
        for i in range(n_trees):
            rng = rng_for(spec.seed, "rf-tree", i)
            rows = rng.integers(n, size=n)
            tree = _Tree()
            tree.build(X[rows], y[rows], max_depth, n_feats, rng)
            tree.finalize()
            trees.append(tree)
        return cls(spec, d, trees)

    def anomaly_scores(self, X):
        X = self._check(X)
        votes = np.zeros(len(X))
        for tree in self.trees:
            votes += (tree.leaf_purity(X) > 0.5).astype(np.float64)
        return votes / len(self.trees)

    def payload_scalars(self):
        return {"n_features": self.n_features, "n_trees": len(self.trees)}

    def payload_arrays(self):
        out: dict[str, np.ndarray] = {}
        for i, tree in enumerate(self.trees):
            out.update(tree.arrays(f"tree{i}"))
        return out

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        trees = [_Tree.from_arrays(arrays, f"tree{i}")
                 for i in range(scalars["n_trees"])]
        return cls(spec, scalars["n_features"], trees)


class KNNMetaModel(MetaClassifierModel):
    """Neighbor-label fraction over internally min-max normalized inputs."""

    def __init__(self, spec, n_features, matrix, labels, lo, hi, k_eff):
        super().__init__(spec, n_features)
        self.matrix = matrix  # already normalized
        self.labels = labels
        self.lo = lo
        self.hi = hi
        self.k_eff = int(k_eff)
        self._index: NeighborIndex | None = None

    @classmethod
    def fit(cls, spec, X, y):
        lo = X.min(axis=0)
        hi = X.max(axis=0)
        matrix = cls._transform(X, lo, hi)
        k_eff = min(int(spec.params["k"]), len(X))
        return cls(spec, X.shape[1], matrix, y.astype(np.int64), lo, hi, k_eff)

    @staticmethod
    def _transform(X, lo, hi):
        span = np.where(hi > lo, hi - lo, 1.0)
        out = (X - lo) / span
        out[:, hi == lo] = 0.0
        return out

    @property
    def index(self) -> NeighborIndex:
        if self._index is None:
            self._index = NeighborIndex(self.matrix)
        return self._index

    def anomaly_scores(self, X):
        X = self._transform(self._check(X), self.lo, self.hi)
        _, idx = self.index.query(X, self.k_eff)
        return self.labels[idx].mean(axis=1)

    def payload_scalars(self):
        return {"n_features": self.n_features, "k_eff": self.k_eff}

    def payload_arrays(self):
        return {"matrix": self.matrix, "labels": self.labels,
                "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, scalars["n_features"], arrays["matrix"],
                   arrays["labels"], arrays["lo"], arrays["hi"], scalars["k_eff"])


class GaussianNBModel(MetaClassifierModel):
    """Per-class independent Gaussians; the score is the attack posterior."""

    def __init__(self, spec, n_features, log_prior, mean, var):
        super().__init__(spec, n_features)
        self.log_prior = log_prior  # (2,)
        self.mean = mean            # (2, d)
        self.var = var              # (2, d)

    @classmethod
    def fit(cls, spec, X, y):
        n, d = X.shape
        log_prior = np.empty(2)
        mean = np.empty((2, d))
        var = np.empty((2, d))
        for c in (0, 1):
            rows = X[y == c]
            log_prior[c] = np.log(len(rows) / n)
            mean[c] = rows.mean(axis=0)
            var[c] = np.maximum(rows.var(axis=0), GNB_VARIANCE_FLOOR)
        return cls(spec, d, log_prior, mean, var)

    def anomaly_scores(self, X):
        X = self._check(X)
        log_like = np.empty((len(X), 2))
        for c in (0, 1):
            z = (X - self.mean[c]) ** 2 / (2.0 * self.var[c])
            log_like[:, c] = self.log_prior[c] - 0.5 * np.log(
                2.0 * np.pi * self.var[c]).sum() - z.sum(axis=1)
        # posterior of the attack class, numerically stable
        return 1.0 / (1.0 + np.exp(log_like[:, 0] - log_like[:, 1]))

    def payload_arrays(self):
        return {"log_prior": self.log_prior, "mean": self.mean, "var": self.var}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, scalars["n_features"], arrays["log_prior"],
                   arrays["mean"], arrays["var"])


_META_REGISTRY = {
    "DecisionTree": DecisionTreeModel,
    "RandomForest": RandomForestModel,
    "KNN": KNNMetaModel,
    "GaussianNB": GaussianNBModel,
}


def fit_meta(spec: MetaClassifierSpec, matrix, labels) -> MetaClassifierModel:
    """Fit the requested classifier; a single-class fit degrades to constant."""
    X = np.ascontiguousarray(np.atleast_2d(matrix), dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if len(X) < 2:
        raise ValueError("meta-level fitting needs at least 2 rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("meta-level features must be finite")
    classes = np.unique(y)
    if len(classes) < 2:
        logger.warning("single-class training set; fitting a constant classifier")
        return ConstantModel(spec, X.shape[1], classes[0])
    return _META_REGISTRY[spec.kind].fit(spec, X, y)


def meta_model_from_payload(spec: MetaClassifierSpec, scalars: dict,
                            arrays: dict) -> MetaClassifierModel:
    if "constant_label" in scalars:
        return ConstantModel(spec, scalars["n_features"], scalars["constant_label"])
    return _META_REGISTRY[spec.kind].from_payload(spec, scalars, arrays)


def default_meta_grid(seed: int = 0) -> list[MetaClassifierSpec]:
    """The stock meta-level search grid, in stable tie-breaking order."""
    grid: list[MetaClassifierSpec] = []
    for k in (1, 3, 10, 30, 100):
        grid.append(MetaClassifierSpec("KNN", {"k": k}, seed))
    for depth in (5, 20, None):
        grid.append(MetaClassifierSpec("DecisionTree", {"max_depth": depth}, seed))
    for trees in (10, 30, 100):
        for depth in (None, 10):
            grid.append(MetaClassifierSpec("RandomForest",
                                           {"trees": trees, "max_depth": depth}, seed))
    grid.append(MetaClassifierSpec("GaussianNB", {}, seed))
    return grid


def random_forest_grid(seed: int = 0) -> list[MetaClassifierSpec]:
    return [s for s in default_meta_grid(seed) if s.kind == "RandomForest"]


DEFAULT_META_SPEC = MetaClassifierSpec("RandomForest", {"trees": 100, "max_depth": None})
