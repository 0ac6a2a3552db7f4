"""Run configuration: one JSON document drives a fully reproducible run."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

from .learners import AlgorithmSpec
from .metalevel import MetaClassifierSpec, default_meta_grid, random_forest_grid

ENV_OUT_DIR = "IDSTACK_OUT"
ENV_WORKERS = "IDSTACK_WORKERS"


@dataclass
class RunConfig:
    label_column: str = "label"
    normal_value: str = "normal"
    split_fraction: float = 0.5
    seed: int = 0
    out_dir: str = field(default_factory=lambda: os.environ.get(ENV_OUT_DIR, "runs"))
    workers: int = field(default_factory=lambda: int(os.environ.get(ENV_WORKERS, "1")))
    feature_set_kind: str = "FullF"
    feature_policy: str = "none"  # none | above_mean | top_k
    top_k: int | None = None
    base_sample_fraction: float = 1.0
    ig_bins: int = 10
    tune_repeats: int = 1
    meta_grid_name: str = "default"  # default | rf
    # None means the stock 13-learner ensemble sized at fit time
    ensemble: list[dict] | None = None

    def ensemble_specs(self, n_features: int) -> list[AlgorithmSpec]:
        from .learners import default_ensemble_specs

        if self.ensemble is None:
            return default_ensemble_specs(n_features)
        return [AlgorithmSpec.from_json(obj) for obj in self.ensemble]

    def meta_grid(self) -> list[MetaClassifierSpec]:
        from .util import child_seed

        seed = child_seed(self.seed, "meta")
        if self.meta_grid_name == "rf":
            return random_forest_grid(seed)
        if self.meta_grid_name == "default":
            return default_meta_grid(seed)
        raise ValueError(f"unknown meta grid {self.meta_grid_name!r}")

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(obj: dict) -> "RunConfig":
        known = {f for f in RunConfig.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return RunConfig(**obj)

    @staticmethod
    def load(path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return RunConfig.from_json(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
