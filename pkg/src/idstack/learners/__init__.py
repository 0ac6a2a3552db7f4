"""Unsupervised base learners: 13 detectors spanning 7 algorithm families."""

from __future__ import annotations

import math

from .base import (
    ALL_ALGORITHMS,
    FAMILIES,
    NEIGHBOR_ALGORITHMS,
    PARAM_NAMES,
    AlgorithmSpec,
    BaseLearnerModel,
    FitError,
    SharedFitContext,
    fit,
    model_from_payload,
)
from .cluster_based import DBSCANModel, GMeansModel, KMeansModel, LDCOFModel
from .independent import HBOSModel, IForestModel, SDOModel, SOMModel
from .neighbor_based import COFModel, FastABODModel, KNNModel, LOFModel, ODINModel

_REGISTRY = {
    "COF": COFModel,
    "DBSCAN": DBSCANModel,
    "FastABOD": FastABODModel,
    "GMeans": GMeansModel,
    "HBOS": HBOSModel,
    "IForest": IForestModel,
    "KMeans": KMeansModel,
    "KNN": KNNModel,
    "LDCOF": LDCOFModel,
    "LOF": LOFModel,
    "ODIN": ODINModel,
    "SDO": SDOModel,
    "SOM": SOMModel,
}


def registry() -> dict[str, type]:
    return _REGISTRY


def covered_families(specs: list[AlgorithmSpec]) -> set[str]:
    out: set[str] = set()
    for spec in specs:
        out.update(spec.families)
    return out


def dbscan_eps_for(n_features: int, paper_eps: float) -> float:
    """Translate a raw-unit eps grid value into normalized-space units.

    The published grid assumes unscaled flow counters; on data scaled to the
    unit cube we take eps/10000 of the cube diagonal instead.
    """
    return (paper_eps / 10000.0) * math.sqrt(n_features)


def default_ensemble_specs(n_features: int) -> list[AlgorithmSpec]:
    """The stock 13-learner ensemble with moderate parameters.

    Order is fixed and alphabetical; it defines the meta-feature column
    layout everywhere downstream.
    """
    return [
        AlgorithmSpec("COF", {"k": 10}),
        AlgorithmSpec("DBSCAN", {"minPts": 5, "eps": dbscan_eps_for(n_features, 500)}),
        AlgorithmSpec("FastABOD", {"k": 10}),
        AlgorithmSpec("GMeans", {}),
        AlgorithmSpec("HBOS", {"b": 10}),
        AlgorithmSpec("IForest", {"t": 100, "s": 256}),
        AlgorithmSpec("KMeans", {"c": 10}),
        AlgorithmSpec("KNN", {"k": 10}),
        AlgorithmSpec("LDCOF", {"c": 10}),
        AlgorithmSpec("LOF", {"k": 10}),
        AlgorithmSpec("ODIN", {"k": 10}),
        AlgorithmSpec("SDO", {"obs": 100, "q": 0.1}),
        AlgorithmSpec("SOM", {"e": 5, "x": 25}),
    ]


__all__ = [
    "ALL_ALGORITHMS",
    "FAMILIES",
    "NEIGHBOR_ALGORITHMS",
    "PARAM_NAMES",
    "AlgorithmSpec",
    "BaseLearnerModel",
    "FitError",
    "SharedFitContext",
    "covered_families",
    "dbscan_eps_for",
    "default_ensemble_specs",
    "fit",
    "model_from_payload",
    "registry",
]
