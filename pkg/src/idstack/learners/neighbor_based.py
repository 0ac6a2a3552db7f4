"""Detectors built on k-nearest-neighbor searches over the train set.

All five share one NeighborIndex: the neighbor lists of a query are computed
once per point and reused, which is why these algorithms group together in
the pipeline. Queries never treat the scored point as part of the train set.
"""

from __future__ import annotations

import numpy as np

from ..neighbors import NeighborIndex
from ..util import OpCounter
from .base import AlgorithmSpec, BaseLearnerModel, SharedFitContext, clamp_neighbor_count

SCORE_CAP = 1e12  # finite stand-in for density ratios against duplicate piles


class _NeighborModel(BaseLearnerModel):
    """Common storage: the train matrix plus a lazily (re)built index."""

    def __init__(self, spec: AlgorithmSpec, train: np.ndarray, k_eff: int,
                 index: NeighborIndex | None = None) -> None:
        super().__init__(spec, len(train))
        self.train = np.ascontiguousarray(train, dtype=np.float64)
        self.k_eff = int(k_eff)
        self._index = index

    @property
    def index(self) -> NeighborIndex:
        if self._index is None:
            self._index = NeighborIndex(self.train)
        return self._index

    def payload_scalars(self) -> dict:
        return {"k_eff": self.k_eff}

    def payload_arrays(self) -> dict[str, np.ndarray]:
        return {"train": self.train}


class KNNModel(_NeighborModel):
    """Mean distance to the k nearest train points."""

    @classmethod
    def fit(cls, spec: AlgorithmSpec, train: np.ndarray, rng,
            shared: SharedFitContext) -> "KNNModel":
        index = shared.ensure_index(train)
        model = cls(spec, train, 0, index)
        model.k_eff = clamp_neighbor_count(int(spec.params["k"]), len(train), model)
        return model

    def _score(self, points, counter):
        d, _ = self.index.query(points, self.k_eff, counter)
        return d.mean(axis=1)

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["train"], scalars["k_eff"])


class ODINModel(_NeighborModel):
    """Inverse in-degree of the query in the k-NN graph over train + query.

    A train point t links to the query x when d(t, x) beats t's k-th nearest
    train distance; ties keep the incumbent train point. Score 1/(1+indegree)
    makes isolated points score 1.
    """

    def __init__(self, spec, train, k_eff, kth_dist=None, index=None):
        super().__init__(spec, train, k_eff, index)
        self.kth_dist = kth_dist

    @classmethod
    def fit(cls, spec, train, rng, shared):
        index = shared.ensure_index(train)
        model = cls(spec, train, 0, index=index)
        model.k_eff = clamp_neighbor_count(int(spec.params["k"]), len(train), model)
        d, _ = index.train_neighbors(model.k_eff)
        model.kth_dist = d[:, -1].copy()
        return model

    def _score(self, points, counter):
        max_reach = float(self.kth_dist.max())
        groups = self.index.within_radius(points, max_reach, counter)
        scores = np.empty(len(points))
        for i, cand in enumerate(groups):
            if len(cand) == 0:
                scores[i] = 1.0
                continue
            d = self.index.distances_to(points[i], cand)[0]
            indegree = int(np.count_nonzero(d < self.kth_dist[cand]))
            scores[i] = 1.0 / (1.0 + indegree)
        return scores

    def payload_arrays(self):
        return {"train": self.train, "kth_dist": self.kth_dist}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["train"], scalars["k_eff"], arrays["kth_dist"])


class LOFModel(_NeighborModel):
    """Local outlier factor: query density against its neighbors' densities."""

    def __init__(self, spec, train, k_eff, kdist=None, lrd=None, index=None):
        super().__init__(spec, train, k_eff, index)
        self.kdist = kdist
        self.lrd = lrd

    @classmethod
    def fit(cls, spec, train, rng, shared):
        index = shared.ensure_index(train)
        model = cls(spec, train, 0, index=index)
        model.k_eff = clamp_neighbor_count(int(spec.params["k"]), len(train), model)
        d, idx = index.train_neighbors(model.k_eff)
        model.kdist = d[:, -1].copy()
        reach = np.maximum(model.kdist[idx], d)
        mean_reach = reach.mean(axis=1)
        with np.errstate(divide="ignore"):
            model.lrd = np.where(mean_reach > 0, 1.0 / mean_reach, np.inf)
        return model

    def _score(self, points, counter):
        d, idx = self.index.query(points, self.k_eff, counter)
        reach = np.maximum(self.kdist[idx], d)
        mean_reach = reach.mean(axis=1)
        neighbor_lrd = self.lrd[idx]
        scores = np.empty(len(points))
        for i in range(len(points)):
            if mean_reach[i] <= 0.0:
                scores[i] = 1.0  # duplicate-point degenerate
                continue
            query_lrd = 1.0 / mean_reach[i]
            ratios = np.where(np.isinf(neighbor_lrd[i]), SCORE_CAP,
                              neighbor_lrd[i] / query_lrd)
            scores[i] = min(float(ratios.mean()), SCORE_CAP)
        return scores

    def payload_arrays(self):
        return {"train": self.train, "kdist": self.kdist, "lrd": self.lrd}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["train"], scalars["k_eff"], arrays["kdist"], arrays["lrd"])


def chained_distance(anchor: np.ndarray, members: np.ndarray) -> float:
    """Average chaining distance of `anchor` through its neighbor set.

    Grows a path greedily from the anchor, at each step attaching the member
    closest to any point already on the path; edge costs are averaged with
    linearly decreasing weights so early links dominate.
    """
    r = len(members)
    if r == 0:
        return 0.0
    group = np.vstack([anchor[None, :], members])
    diff = group[:, None, :] - group[None, :, :]
    dmat = np.sqrt((diff * diff).sum(axis=2))
    in_path = np.zeros(r + 1, dtype=bool)
    in_path[0] = True
    best = dmat[0].copy()  # min distance from the current path to each node
    best[0] = np.inf
    total = 0.0
    denom = r * (r + 1)
    for step in range(1, r + 1):
        nxt = int(np.argmin(best))  # ties resolve to the lowest index
        total += (2.0 * (r + 1 - step) / denom) * best[nxt]
        in_path[nxt] = True
        best = np.minimum(best, dmat[nxt])
        best[in_path] = np.inf
    return float(total)


class COFModel(_NeighborModel):
    """Connectivity-based outlier factor using set-based chaining distances."""

    def __init__(self, spec, train, k_eff, ac_dist=None, index=None):
        super().__init__(spec, train, k_eff, index)
        self.ac_dist = ac_dist

    @classmethod
    def fit(cls, spec, train, rng, shared):
        index = shared.ensure_index(train)
        model = cls(spec, train, 0, index=index)
        model.k_eff = clamp_neighbor_count(int(spec.params["k"]), len(train), model)
        _, idx = index.train_neighbors(model.k_eff)
        model.ac_dist = np.array([
            chained_distance(train[i], train[idx[i]]) for i in range(len(train))
        ])
        return model

    def _score(self, points, counter):
        _, idx = self.index.query(points, self.k_eff, counter)
        scores = np.empty(len(points))
        for i in range(len(points)):
            ac_query = chained_distance(points[i], self.train[idx[i]])
            denom = float(self.ac_dist[idx[i]].mean())
            if denom <= 0.0:
                scores[i] = 1.0 if ac_query <= 0.0 else SCORE_CAP
            else:
                scores[i] = min(ac_query / denom, SCORE_CAP)
        return scores

    def payload_arrays(self):
        return {"train": self.train, "ac_dist": self.ac_dist}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["train"], scalars["k_eff"], arrays["ac_dist"])


class FastABODModel(_NeighborModel):
    """Angle-based outlier factor restricted to the k nearest neighbors.

    Inliers see their neighborhood under widely varying angles, outliers
    under a narrow spread, so the negated angle variance orients the score
    as higher-is-more-anomalous.
    """

    @classmethod
    def fit(cls, spec, train, rng, shared):
        index = shared.ensure_index(train)
        model = cls(spec, train, 0, index)
        model.k_eff = clamp_neighbor_count(int(spec.params["k"]), len(train), model)
        return model

    def _score(self, points, counter):
        _, idx = self.index.query(points, self.k_eff, counter)
        scores = np.empty(len(points))
        skipped_all = 0
        for i in range(len(points)):
            abof = _abof(points[i], self.train[idx[i]])
            if abof is None:
                skipped_all += 1
                scores[i] = 0.0
            else:
                scores[i] = -abof
        if skipped_all:
            self.warn(f"{skipped_all} points had no usable neighbor pairs; scored 0")
        return scores

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["train"], scalars["k_eff"])


def _abof(point: np.ndarray, neighbors: np.ndarray) -> float | None:
    diff = neighbors - point
    sq = (diff * diff).sum(axis=1)
    usable = sq > 0.0  # coincident neighbors contribute no angle
    diff = diff[usable]
    sq = sq[usable]
    m = len(diff)
    if m < 2:
        return None
    gram = diff @ diff.T
    a, b = np.triu_indices(m, k=1)
    theta = gram[a, b] / (sq[a] * sq[b])
    weight = 1.0 / np.sqrt(sq[a] * sq[b])
    wsum = weight.sum()
    mean = (weight * theta).sum() / wsum
    mean_sq = (weight * theta * theta).sum() / wsum
    return float(max(mean_sq - mean * mean, 0.0))
