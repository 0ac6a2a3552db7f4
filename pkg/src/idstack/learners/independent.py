"""Detectors with standalone heuristics: HBOS, Isolation Forest, SDO, SOM."""

from __future__ import annotations

import math

import numpy as np

from .base import AlgorithmSpec, BaseLearnerModel, FitError, SharedFitContext

EULER_GAMMA = 0.5772156649015329


class HBOSModel(BaseLearnerModel):
    """Sum of negative log histogram heights, one histogram per feature.

    Heights are max-normalized per feature; empty bins and out-of-range
    values fall back to a floor of 1/(10n) so the log stays finite.
    """

    def __init__(self, spec, lo, hi, heights, floor, train_size):
        super().__init__(spec, train_size)
        self.lo = lo
        self.hi = hi
        self.heights = heights  # (n_features, bins)
        self.floor = float(floor)

    @classmethod
    def fit(cls, spec: AlgorithmSpec, train: np.ndarray, rng,
            shared: SharedFitContext) -> "HBOSModel":
        bins = int(spec.params["b"])
        n, d = train.shape
        lo = train.min(axis=0)
        hi = train.max(axis=0)
        heights = np.zeros((d, bins))
        for f in range(d):
            if hi[f] == lo[f]:
                heights[f, 0] = 1.0  # single logical bin holds everything
                continue
            counts, _ = np.histogram(train[:, f], bins=bins, range=(lo[f], hi[f]))
            heights[f] = counts / counts.max()
        return cls(spec, lo, hi, heights, 1.0 / (10.0 * n), n)

    def _score(self, points, counter):
        m, d = points.shape
        bins = self.heights.shape[1]
        if counter is not None:
            counter.add_rows(m * d)
        scores = np.zeros(m)
        for f in range(d):
            x = points[:, f]
            span = self.hi[f] - self.lo[f]
            if span == 0:
                h = np.where(x == self.lo[f], self.heights[f, 0], self.floor)
            else:
                idx = np.clip(((x - self.lo[f]) / span * bins).astype(np.int64),
                              0, bins - 1)
                h = self.heights[f, idx]
                in_range = (x >= self.lo[f]) & (x <= self.hi[f])
                h = np.where(in_range, h, self.floor)
            scores += np.log(1.0 / np.maximum(h, self.floor))
        return scores

    def payload_scalars(self):
        return {"floor": self.floor, "train_size": self.train_size}

    def payload_arrays(self):
        return {"lo": self.lo, "hi": self.hi, "heights": self.heights}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["lo"], arrays["hi"], arrays["heights"],
                   scalars["floor"], scalars.get("train_size", 0))


def average_path_length(m: int) -> float:
    """Expected unsuccessful-search path length in a BST of m points."""
    if m < 2:
        return 0.0
    if m == 2:
        return 1.0
    return 2.0 * (math.log(m - 1) + EULER_GAMMA) - 2.0 * (m - 1) / m


class _IsolationTree:
    """One random isolation tree, stored as flat arrays for batch scoring."""

    __slots__ = ("feature", "threshold", "left", "right", "adjust", "is_leaf")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.adjust: list[float] = []
        self.is_leaf: list[bool] = []

    def build(self, data: np.ndarray, depth_limit: int, rng) -> None:
        root = self._new_node()
        self._build(root, data, 0, depth_limit, rng)

    def _build(self, node, data, depth, depth_limit, rng):
        lo = data.min(axis=0)
        hi = data.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if len(data) <= 1 or depth >= depth_limit or len(splittable) == 0:
            self.is_leaf[node] = True
            self.adjust[node] = average_path_length(len(data))
            return
        f = int(splittable[rng.integers(len(splittable))])
        thr = float(rng.uniform(lo[f], hi[f]))
        mask = data[:, f] < thr
        self.is_leaf[node] = False
        self.feature[node] = f
        self.threshold[node] = thr
        left = self._new_node()
        right = self._new_node()
        self.left[node] = left
        self.right[node] = right
        self._build(left, data[mask], depth + 1, depth_limit, rng)
        self._build(right, data[~mask], depth + 1, depth_limit, rng)

    def _new_node(self) -> int:
        node = len(self.feature)
        for lst in (self.feature, self.threshold, self.left, self.right,
                    self.adjust, self.is_leaf):
            lst.append(0)
        return node

    def finalize(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.adjust = np.asarray(self.adjust, dtype=np.float64)
        self.is_leaf = np.asarray(self.is_leaf, dtype=bool)

    def path_lengths(self, points: np.ndarray) -> np.ndarray:
        cur = np.zeros(len(points), dtype=np.int64)
        depth = np.zeros(len(points))
        active = ~self.is_leaf[cur]
        while active.any():
            nodes = cur[active]
            go_left = points[active, self.feature[nodes]] < self.threshold[nodes]
            cur[active] = np.where(go_left, self.left[nodes], self.right[nodes])
            depth[active] += 1.0
            active = ~self.is_leaf[cur]
        return depth + self.adjust[cur]


class IForestModel(BaseLearnerModel):
    """Isolation forest: short average isolation paths mean anomalous."""

    def __init__(self, spec, trees, sample_size, train_size):
        super().__init__(spec, train_size)
        self.trees = trees
        self.sample_size = int(sample_size)
        self.normalizer = average_path_length(self.sample_size)

    @classmethod
    def fit(cls, spec, train, rng, shared):
        t = int(spec.params["t"])
        s = int(spec.params["s"])
        if s < 2:
            raise FitError("IForest needs tree sample size s >= 2")
        s_eff = min(s, len(train))
        depth_limit = math.ceil(math.log2(s_eff))
        trees = []
        for _ in range(t):
            sample = train[rng.choice(len(train), size=s_eff, replace=False)]
            tree = _IsolationTree()
            tree.build(sample, depth_limit, rng)
            tree.finalize()
            trees.append(tree)
        return cls(spec, trees, s_eff, len(train))

    def _score(self, points, counter):
        if counter is not None:
            depth_limit = math.ceil(math.log2(self.sample_size))
            counter.add_rows(len(points) * len(self.trees) * (depth_limit + 1))
        mean_path = np.zeros(len(points))
        for tree in self.trees:
            mean_path += tree.path_lengths(points)
        mean_path /= len(self.trees)
        return np.exp2(-mean_path / self.normalizer)

    def payload_scalars(self):
        return {"sample_size": self.sample_size, "train_size": self.train_size,
                "n_trees": len(self.trees)}

    def payload_arrays(self):
        out = {}
        for i, tree in enumerate(self.trees):
            out[f"tree{i}_feature"] = tree.feature
            out[f"tree{i}_threshold"] = tree.threshold
            out[f"tree{i}_left"] = tree.left
            out[f"tree{i}_right"] = tree.right
            out[f"tree{i}_adjust"] = tree.adjust
            out[f"tree{i}_is_leaf"] = tree.is_leaf
        return out

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        trees = []
        for i in range(scalars["n_trees"]):
            tree = _IsolationTree()
            tree.feature = arrays[f"tree{i}_feature"]
            tree.threshold = arrays[f"tree{i}_threshold"]
            tree.left = arrays[f"tree{i}_left"]
            tree.right = arrays[f"tree{i}_right"]
            tree.adjust = arrays[f"tree{i}_adjust"]
            tree.is_leaf = arrays[f"tree{i}_is_leaf"]
            trees.append(tree)
        return cls(spec, trees, scalars["sample_size"], scalars.get("train_size", 0))


class SDOModel(BaseLearnerModel):
    """Median distance to the closest fraction of sampled density observers.

    Observers that rarely rank among any train point's closest observers are
    idle and get dropped before scoring.
    """

    def __init__(self, spec, observers, q, train_size):
        super().__init__(spec, train_size)
        self.observers = observers
        self.q = float(q)

    @classmethod
    def fit(cls, spec, train, rng, shared):
        obs = min(int(spec.params["obs"]), len(train))
        q = float(spec.params["q"])
        observers = train[rng.choice(len(train), size=obs, replace=False)]
        closest = max(1, math.ceil(q * obs))
        counts = np.zeros(obs, dtype=np.int64)
        chunk = max(1, int(2_000_000 // max(obs, 1)))
        for start in range(0, len(train), chunk):
            diff = train[start:start + chunk, None, :] - observers[None, :, :]
            dist = np.sqrt((diff * diff).sum(axis=2))
            if closest >= obs:
                idx = np.tile(np.arange(obs), (len(dist), 1))
            else:
                idx = np.argpartition(dist, closest - 1, axis=1)[:, :closest]
            np.add.at(counts, idx.ravel(), 1)
        threshold = np.quantile(counts, 0.1)
        active = counts >= threshold
        model = cls(spec, observers[active], q, len(train))
        if not active.any():
            model.warn("all observers idle; keeping every observer")
            model.observers = observers
        return model

    def _score(self, points, counter):
        n_obs = len(self.observers)
        if counter is not None:
            counter.add_rows(len(points) * n_obs)
        closest = min(max(1, math.ceil(self.q * n_obs)), n_obs)
        diff = points[:, None, :] - self.observers[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        if closest < n_obs:
            part = np.partition(dist, closest - 1, axis=1)[:, :closest]
        else:
            part = dist
        return np.median(part, axis=1)

    def payload_scalars(self):
        return {"q": self.q, "train_size": self.train_size}

    def payload_arrays(self):
        return {"observers": self.observers}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["observers"], scalars["q"], scalars.get("train_size", 0))


def lattice_shape(x: int) -> tuple[int, int]:
    """Most-square factorization of the neuron count."""
    best = 1
    for h in range(1, int(math.isqrt(x)) + 1):
        if x % h == 0:
            best = h
    return best, x // best


class SOMModel(BaseLearnerModel):
    """Quantization error against a self-organizing map's neuron weights."""

    def __init__(self, spec, weights, train_size):
        super().__init__(spec, train_size)
        self.weights = weights

    @classmethod
    def fit(cls, spec, train, rng, shared):
        epochs = int(spec.params["e"])
        x = int(spec.params["x"])
        rows, cols = lattice_shape(x)
        grid_r, grid_c = np.divmod(np.arange(x), cols)
        weights = train[rng.choice(len(train), size=x, replace=len(train) < x)].copy()
        diag = math.sqrt((rows - 1) ** 2 + (cols - 1) ** 2)
        sigma0 = max(diag / 2.0, 1.0)
        total = epochs * len(train)
        step = 0
        for _ in range(epochs):
            for i in rng.permutation(len(train)):
                frac = step / max(total - 1, 1)
                alpha = 0.5 + frac * (0.01 - 0.5)
                sigma = sigma0 * (1.0 / sigma0) ** frac if sigma0 > 1.0 else 1.0
                p = train[i]
                d2 = ((weights - p) ** 2).sum(axis=1)
                bmu = int(d2.argmin())
                lat2 = (grid_r - grid_r[bmu]) ** 2 + (grid_c - grid_c[bmu]) ** 2
                pull = alpha * np.exp(-lat2 / (2.0 * sigma * sigma))
                weights += pull[:, None] * (p - weights)
                step += 1
        return cls(spec, weights, len(train))

    def _score(self, points, counter):
        if counter is not None:
            counter.add_rows(len(points) * len(self.weights))
        diff = points[:, None, :] - self.weights[None, :, :]
        return np.sqrt((diff * diff).sum(axis=2)).min(axis=1)

    def payload_scalars(self):
        return {"train_size": self.train_size}

    def payload_arrays(self):
        return {"weights": self.weights}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["weights"], scalars.get("train_size", 0))
