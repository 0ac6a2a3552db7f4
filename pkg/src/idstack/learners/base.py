"""Base-learner plumbing: specs, the model contract and the fit dispatcher.

Every detector fits on unlabeled train data and emits one numeric anomaly
score per point, oriented so that larger means more anomalous. Fitting with
the same seed is bit-reproducible, and fitted models are immutable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..dataset import Dataset
from ..neighbors import NeighborIndex
from ..util import OpCounter, rng_for

logger = logging.getLogger(__name__)

# family taxonomy used for the ensemble-diversity rule
FAMILIES = {
    "COF": ("density", "neighbour"),
    "DBSCAN": ("clustering",),
    "FastABOD": ("angle", "neighbour"),
    "GMeans": ("clustering",),
    "HBOS": ("statistical",),
    "IForest": ("classification",),
    "KMeans": ("clustering",),
    "KNN": ("neighbour",),
    "LDCOF": ("density", "clustering"),
    "LOF": ("density", "neighbour"),
    "ODIN": ("neighbour",),
    "SDO": ("density",),
    "SOM": ("neural network",),
}

PARAM_NAMES = {
    "COF": ("k",),
    "DBSCAN": ("minPts", "eps"),
    "FastABOD": ("k",),
    "GMeans": (),
    "HBOS": ("b",),
    "IForest": ("t", "s"),
    "KMeans": ("c",),
    "KNN": ("k",),
    "LDCOF": ("c",),
    "LOF": ("k",),
    "ODIN": ("k",),
    "SDO": ("obs", "q"),
    "SOM": ("e", "x"),
}

ALL_ALGORITHMS = tuple(sorted(FAMILIES))

# algorithms whose per-point scoring goes through the shared neighbor index
NEIGHBOR_ALGORITHMS = ("COF", "FastABOD", "KNN", "LOF", "ODIN")


class FitError(Exception):
    """Raised when a learner cannot be fitted on the given data."""


@dataclass(frozen=True)
class AlgorithmSpec:
    algorithm: str
    params: dict

    def __post_init__(self) -> None:
        if self.algorithm not in FAMILIES:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        expected = set(PARAM_NAMES[self.algorithm])
        got = set(self.params)
        if got != expected:
            raise ValueError(
                f"{self.algorithm} expects parameters {sorted(expected)}, got {sorted(got)}"
            )
        for name, value in self.params.items():
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{self.algorithm} parameter {name}={value} must be positive")

    @property
    def families(self) -> tuple[str, ...]:
        return FAMILIES[self.algorithm]

    def label(self) -> str:
        if not self.params:
            return self.algorithm
        inner = ",".join(f"{k}={self.params[k]}" for k in PARAM_NAMES[self.algorithm])
        return f"{self.algorithm}({inner})"

    def to_json(self) -> dict:
        return {"algorithm": self.algorithm, "params": dict(self.params)}

    @staticmethod
    def from_json(obj: dict) -> "AlgorithmSpec":
        return AlgorithmSpec(obj["algorithm"], dict(obj["params"]))


@dataclass
class SharedFitContext:
    """State reused across learners fitted on the same train matrix."""

    index: NeighborIndex | None = None
    kmeans: "object | None" = None  # fitted KMeans model, reused by LDCOF

    def ensure_index(self, train: np.ndarray) -> NeighborIndex:
        if self.index is None:
            self.index = NeighborIndex(train)
        return self.index


class BaseLearnerModel:
    """A fitted unsupervised detector. Subclasses fill in the scoring."""

    def __init__(self, spec: AlgorithmSpec, train_size: int) -> None:
        self.spec = spec
        self.train_size = train_size
        self.warnings: list[str] = []

    def warn(self, message: str) -> None:
        self.warnings.append(message)
        logger.warning("%s: %s", self.spec.label(), message)

    def score(self, points, counter: OpCounter | None = None) -> np.ndarray:
        """Anomaly scores for a batch of points; larger is more anomalous."""
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        return self._score(points, counter)

    def _score(self, points: np.ndarray, counter: OpCounter | None) -> np.ndarray:
        raise NotImplementedError

    # serialization: scalars go to the manifest, arrays become blobs
    def payload_scalars(self) -> dict:
        return {}

    def payload_arrays(self) -> dict[str, np.ndarray]:
        return {}


def clamp_neighbor_count(k: int, n: int, model: BaseLearnerModel) -> int:
    if k >= n:
        model.warn(f"k={k} >= train size {n}; clamped to {n - 1}")
        return n - 1
    return int(k)


def as_matrix(train) -> np.ndarray:
    if isinstance(train, Dataset):
        if train.partition_tag == "test":
            raise FitError("refusing to fit a model on the test partition")
        return train.features
    return np.ascontiguousarray(np.atleast_2d(train), dtype=np.float64)


def fit(spec: AlgorithmSpec, train, seed: int,
        shared: SharedFitContext | None = None) -> BaseLearnerModel:
    """Fit one base learner; randomness is fully determined by the seed."""
    from . import registry  # late import: registry needs the subclasses

    matrix = as_matrix(train)
    if len(matrix) < 2:
        raise FitError(f"{spec.algorithm} needs at least 2 train points, got {len(matrix)}")
    if not np.all(np.isfinite(matrix)):
        raise FitError("train matrix contains non-finite values")
    cls = registry()[spec.algorithm]
    rng = rng_for(seed, "fit", spec.algorithm)
    return cls.fit(spec, matrix, rng, shared or SharedFitContext())


def model_from_payload(spec: AlgorithmSpec, scalars: dict,
                       arrays: dict[str, np.ndarray]) -> BaseLearnerModel:
    from . import registry

    return registry()[spec.algorithm].from_payload(spec, scalars, arrays)
