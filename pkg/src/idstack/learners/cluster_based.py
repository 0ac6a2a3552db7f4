"""Clustering-driven detectors: K-Means, G-Means, LDCOF and DBSCAN."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from ..neighbors import NeighborIndex
from .base import AlgorithmSpec, BaseLearnerModel, FitError, SharedFitContext

LLOYD_MAX_ITER = 300
LLOYD_TOL = 1e-9

# adjusted Anderson-Darling critical values (normality, both moments estimated)
AD_CRITICAL = {0.1: 0.631, 0.05: 0.752, 0.025: 0.873, 0.01: 1.035,
               0.005: 1.159, 0.0001: 1.8692}
GMEANS_ALPHA = 0.0001
GMEANS_MAX_CLUSTERS = 64
GMEANS_MIN_SPLIT_SIZE = 8

LDCOF_LARGE_COVERAGE = 0.5
_TINY = 1e-12


def _nearest_centroid(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    diff = points[:, None, :] - centroids[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    assign = dist.argmin(axis=1)
    return assign, dist[np.arange(len(points)), assign]


def kmeans_plus_plus(points: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    first = int(rng.integers(n))
    centroids = [points[first]]
    d2 = ((points - points[first]) ** 2).sum(axis=1)
    for _ in range(1, c):
        total = d2.sum()
        if total <= 0:  # remaining mass is all duplicates
            pick = int(rng.integers(n))
        else:
            pick = int(rng.choice(n, p=d2 / total))
        centroids.append(points[pick])
        d2 = np.minimum(d2, ((points - points[pick]) ** 2).sum(axis=1))
    return np.array(centroids)


def lloyd(points: np.ndarray, centroids: np.ndarray,
          max_iter: int = LLOYD_MAX_ITER) -> tuple[np.ndarray, np.ndarray]:
    """Iterate assignment/update until centroids stop moving.

    Empty clusters are re-seeded with the point farthest from its centroid,
    so the requested cluster count survives when c <= n distinct points.
    """
    centroids = centroids.copy()
    c = len(centroids)
    assign = np.zeros(len(points), dtype=np.int64)
    for _ in range(max_iter):
        assign, dist = _nearest_centroid(points, centroids)
        new_centroids = centroids.copy()
        for j in range(c):
            members = assign == j
            if members.any():
                new_centroids[j] = points[members].mean(axis=0)
            else:
                new_centroids[j] = points[int(dist.argmax())]
                dist[int(dist.argmax())] = 0.0
        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if shift <= LLOYD_TOL:
            break
    assign, _ = _nearest_centroid(points, centroids)
    return centroids, assign


class KMeansModel(BaseLearnerModel):
    """Distance to the nearest centroid of a c-means clustering."""

    def __init__(self, spec, centroids, train_size, assignments=None):
        super().__init__(spec, train_size)
        self.centroids = centroids
        self.assignments = assignments  # kept for LDCOF reuse, not serialized

    @classmethod
    def fit(cls, spec: AlgorithmSpec, train: np.ndarray, rng,
            shared: SharedFitContext) -> "KMeansModel":
        c = int(spec.params["c"])
        if c > len(train):
            c = len(train)
        centroids, assign = lloyd(train, kmeans_plus_plus(train, c, rng))
        model = cls(spec, centroids, len(train), assign)
        if shared.kmeans is None:
            shared.kmeans = model
        return model

    def _score(self, points, counter):
        if counter is not None:
            counter.add_rows(len(self.centroids) * len(points))
        _, dist = _nearest_centroid(points, self.centroids)
        return dist

    def payload_arrays(self):
        return {"centroids": self.centroids}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["centroids"], scalars.get("train_size", 0))

    def payload_scalars(self):
        return {"train_size": self.train_size}


def anderson_darling_stat(values: np.ndarray) -> float | None:
    """Adjusted A^2 statistic for normality with estimated mean/variance."""
    n = len(values)
    if n < GMEANS_MIN_SPLIT_SIZE:
        return None
    std = values.std()
    if std <= 0:
        return None
    z = np.sort((values - values.mean()) / std)
    u = np.clip(ndtr(z), 1e-300, 1 - 1e-16)
    i = np.arange(1, n + 1)
    a2 = -n - np.mean((2 * i - 1) * (np.log(u) + np.log(1 - u[::-1])))
    return float(a2 * (1 + 4.0 / n - 25.0 / (n * n)))


class GMeansModel(BaseLearnerModel):
    """K-Means with the cluster count found by recursive normality testing.

    A cluster splits in two when its members, projected on the axis joining
    the two trial children, fail an Anderson-Darling normality test at a
    strict significance level.
    """

    def __init__(self, spec, centroids, train_size):
        super().__init__(spec, train_size)
        self.centroids = centroids

    @classmethod
    def fit(cls, spec, train, rng, shared):
        centroids = train.mean(axis=0, keepdims=True)
        critical = AD_CRITICAL[GMEANS_ALPHA]
        while len(centroids) < min(GMEANS_MAX_CLUSTERS, len(train)):
            centroids, assign = lloyd(train, centroids)
            new_centroids = []
            split_any = False
            for j in range(len(centroids)):
                members = train[assign == j]
                children = _try_split(members, centroids[j], critical)
                if children is None:
                    new_centroids.append(centroids[j][None, :])
                else:
                    new_centroids.append(children)
                    split_any = True
            centroids = np.vstack(new_centroids)
            if not split_any:
                break
        centroids, _ = lloyd(train, centroids)
        return cls(spec, centroids, len(train))

    def _score(self, points, counter):
        if counter is not None:
            counter.add_rows(len(self.centroids) * len(points))
        _, dist = _nearest_centroid(points, self.centroids)
        return dist

    def payload_arrays(self):
        return {"centroids": self.centroids}

    def payload_scalars(self):
        return {"train_size": self.train_size}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["centroids"], scalars.get("train_size", 0))


def _try_split(members: np.ndarray, center: np.ndarray,
               critical: float) -> np.ndarray | None:
    if len(members) < GMEANS_MIN_SPLIT_SIZE:
        return None
    centered = members - members.mean(axis=0)
    cov = centered.T @ centered / len(members)
    eigvals, eigvecs = np.linalg.eigh(cov)
    lam = eigvals[-1]
    if lam <= 0:
        return None
    axis = eigvecs[:, -1]
    offset = axis * np.sqrt(2.0 * lam / np.pi)
    children, _ = lloyd(members, np.vstack([center + offset, center - offset]))
    direction = children[0] - children[1]
    norm2 = float((direction * direction).sum())
    if norm2 <= 0:
        return None
    projected = members @ direction
    stat = anderson_darling_stat(projected)
    if stat is None or stat <= critical:
        return None
    return children


class LDCOFModel(BaseLearnerModel):
    """Distance to the nearest large cluster, in units of its mean radius."""

    def __init__(self, spec, large_centroids, mean_radius, train_size):
        super().__init__(spec, train_size)
        self.large_centroids = large_centroids
        self.mean_radius = mean_radius

    @classmethod
    def fit(cls, spec, train, rng, shared):
        c = min(int(spec.params["c"]), len(train))
        reuse = shared.kmeans
        if reuse is not None and len(reuse.centroids) == c and reuse.assignments is not None:
            centroids, assign = reuse.centroids, reuse.assignments
        else:
            centroids, assign = lloyd(train, kmeans_plus_plus(train, c, rng))
        sizes = np.bincount(assign, minlength=len(centroids))
        order = sorted(range(len(centroids)), key=lambda j: (-sizes[j], j))
        covered = 0
        large: list[int] = []
        target = LDCOF_LARGE_COVERAGE * len(train)
        for j in order:
            if covered >= target:
                break
            if sizes[j] == 0:
                continue
            large.append(j)
            covered += sizes[j]
        model = cls(spec, None, None, len(train))
        if not large:
            model.warn("no large cluster found; treating every cluster as large")
            large = [j for j in order if sizes[j] > 0]
        radii = []
        for j in large:
            members = train[assign == j]
            d = np.sqrt(((members - centroids[j]) ** 2).sum(axis=1))
            radii.append(max(float(d.mean()), _TINY))
        model.large_centroids = centroids[large]
        model.mean_radius = np.array(radii)
        return model

    def _score(self, points, counter):
        if counter is not None:
            counter.add_rows(len(self.large_centroids) * len(points))
        assign, dist = _nearest_centroid(points, self.large_centroids)
        return dist / self.mean_radius[assign]

    def payload_arrays(self):
        return {"large_centroids": self.large_centroids, "mean_radius": self.mean_radius}

    def payload_scalars(self):
        return {"train_size": self.train_size}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["large_centroids"], arrays["mean_radius"],
                   scalars.get("train_size", 0))


class DBSCANModel(BaseLearnerModel):
    """Zero inside any core point's eps-ball, else distance to nearest core.

    Core points are train points with at least minPts train neighbors
    (themselves included) within eps, matching the classic definition.
    """

    def __init__(self, spec, cores, eps, fallback, train_size):
        super().__init__(spec, train_size)
        self.cores = cores
        self.eps = float(eps)
        self.fallback = bool(fallback)  # no cores: plain nearest-train distance
        self._core_index: NeighborIndex | None = None

    @property
    def core_index(self) -> NeighborIndex:
        if self._core_index is None:
            self._core_index = NeighborIndex(self.cores)
        return self._core_index

    @classmethod
    def fit(cls, spec, train, rng, shared):
        min_pts = int(spec.params["minPts"])
        eps = float(spec.params["eps"])
        index = shared.ensure_index(train)
        groups = index.within_radius(train, eps)
        core_mask = np.array([len(g) >= min_pts for g in groups])
        model = cls(spec, train[core_mask], eps, False, len(train))
        if not core_mask.any():
            model.warn("no core points; scoring falls back to nearest-train distance")
            model.cores = train.copy()
            model.fallback = True
        return model

    def _score(self, points, counter):
        d, _ = self.core_index.query(points, 1, counter)
        nearest = d[:, 0]
        if self.fallback:
            return nearest
        return np.where(nearest <= self.eps, 0.0, nearest)

    def payload_scalars(self):
        return {"eps": self.eps, "fallback": self.fallback, "train_size": self.train_size}

    def payload_arrays(self):
        return {"cores": self.cores}

    @classmethod
    def from_payload(cls, spec, scalars, arrays):
        return cls(spec, arrays["cores"], scalars["eps"], scalars["fallback"],
                   scalars.get("train_size", 0))
