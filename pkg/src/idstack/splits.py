"""Train/validation/test splitting and zero-day dataset variants.

A variant excludes one attack category from train and validation entirely,
so that category plays the role of a zero-day attack at test time. Splits
are stratified per class and fully determined by the seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import DataError, Dataset
from .util import rng_for

logger = logging.getLogger(__name__)

VALIDATION_FRACTION = 0.1


@dataclass(frozen=True)
class VariantSpec:
    dataset_name: str
    excluded_attack: str | None
    split_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must lie in (0, 1)")

    @property
    def variant_name(self) -> str:
        if self.excluded_attack is None:
            return self.dataset_name
        return f"{self.dataset_name}_{self.excluded_attack}"


@dataclass(frozen=True)
class SplitDataset:
    train: Dataset
    validation: Dataset
    test: Dataset
    excluded_attack: str | None

    def __post_init__(self) -> None:
        if self.excluded_attack is not None:
            for part in (self.train, self.validation):
                if np.any(part.labels == self.excluded_attack):
                    raise DataError("excluded attack leaked into a fit partition")
            if not np.any(self.test.labels == self.excluded_attack):
                raise DataError("test partition lacks the excluded attack")
        for a, b in ((self.train, self.test), (self.validation, self.test)):
            if a.source_indices is not None and b.source_indices is not None:
                if np.intersect1d(a.source_indices, b.source_indices).size:
                    raise DataError("partitions overlap by index provenance")

    @property
    def name(self) -> str:
        if self.excluded_attack is None:
            return self.train.name
        return f"{self.train.name}_{self.excluded_attack}"

    def unknown_fraction(self) -> float:
        """Share of the test partition carrying the excluded attack."""
        if self.excluded_attack is None:
            return 0.0
        return float(np.mean(self.test.labels == self.excluded_attack))


def make_variant(dataset: Dataset, spec: VariantSpec) -> SplitDataset:
    """Split a dataset per the variant protocol.

    Every point of the excluded attack goes to test; the other classes are
    split train/test at `split_fraction` with per-class stratification, and
    a 10% per-class slice of train is carved out for validation (disjoint
    from both train and test).
    """
    if spec.excluded_attack is not None:
        if spec.excluded_attack not in dataset.schema.attack_categories:
            raise DataError(
                f"attack {spec.excluded_attack!r} not in dataset categories "
                f"{sorted(dataset.schema.attack_categories)}"
            )

    labels = dataset.labels
    classes = sorted(set(labels.tolist()))
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    rng = rng_for(spec.seed, "variant", spec.variant_name)
    for cls in classes:
        cls_idx = np.flatnonzero(labels == cls)
        cls_idx = cls_idx[rng.permutation(len(cls_idx))]
        if cls == spec.excluded_attack:
            test_idx.append(cls_idx)
            continue
        cut = int(round(len(cls_idx) * spec.split_fraction))
        train_idx.append(cls_idx[:cut])
        test_idx.append(cls_idx[cut:])

    train_all = np.concatenate(train_idx) if train_idx else np.empty(0, dtype=np.int64)
    test_all = np.concatenate(test_idx) if test_idx else np.empty(0, dtype=np.int64)
    if len(test_all) == 0:
        raise DataError("test partition is empty")
    if len(train_all) == 0:
        raise DataError("train partition is empty")

    # validation: stratified carve-out from the train side
    val_parts: list[np.ndarray] = []
    fit_parts: list[np.ndarray] = []
    for part in train_idx:
        if len(part) == 0:
            continue
        n_val = int(round(len(part) * VALIDATION_FRACTION))
        if n_val == 0 and len(part) >= 2:
            n_val = 1
        val_parts.append(part[:n_val])
        fit_parts.append(part[n_val:])
    val_all = np.concatenate(val_parts) if val_parts else np.empty(0, dtype=np.int64)
    fit_all = np.concatenate(fit_parts) if fit_parts else np.empty(0, dtype=np.int64)
    if len(val_all) == 0:
        logger.warning("%s: train too small for a validation slice; reusing train",
                       spec.variant_name)
        val_all = fit_all

    fit_all = np.sort(fit_all)
    val_all = np.sort(val_all)
    test_all = np.sort(test_all)

    def take(indices: np.ndarray, tag: str) -> Dataset:
        return Dataset(
            schema=dataset.schema,
            features=dataset.features[indices],
            labels=dataset.labels[indices],
            name=dataset.name,
            partition_tag=tag,
            source_indices=indices,
        )

    return SplitDataset(
        train=take(fit_all, "train"),
        validation=take(val_all, "validation"),
        test=take(test_all, "test"),
        excluded_attack=spec.excluded_attack,
    )


def all_variant_specs(dataset: Dataset, split_fraction: float = 0.5,
                      seed: int = 0) -> list[VariantSpec]:
    """One spec per attack category plus the full-dataset split, in stable order."""
    specs = [VariantSpec(dataset.name, None, split_fraction, seed)]
    for attack in sorted(dataset.schema.attack_categories):
        specs.append(VariantSpec(dataset.name, attack, split_fraction, seed))
    return specs


SPLIT_FORMAT_VERSION = "1"


def save_split(split: SplitDataset, path) -> None:
    from .archive import ArchiveWriter

    writer = ArchiveWriter(SPLIT_FORMAT_VERSION)
    meta = {"excluded_attack": split.excluded_attack, "parts": {}}
    for tag in ("train", "validation", "test"):
        part: Dataset = getattr(split, tag)
        meta["parts"][tag] = {
            "name": part.name,
            "feature_names": list(part.schema.feature_names),
            "feature_kinds": list(part.schema.feature_kinds),
            "normal_value": part.schema.normal_value,
            "attack_categories": sorted(part.schema.attack_categories),
            "features": writer.add_array(part.features),
            "labels": writer.add_json(list(map(str, part.labels))),
            "source_indices": (writer.add_array(part.source_indices)
                               if part.source_indices is not None else None),
        }
    writer.write(path, meta)


def load_split(path) -> SplitDataset:
    from .archive import ArchiveReader
    from .dataset import DatasetSchema, NormalizationStats

    reader = ArchiveReader(path, SPLIT_FORMAT_VERSION)
    parts = {}
    for tag, meta in reader.metadata["parts"].items():
        features = reader.array(meta["features"])
        schema = DatasetSchema(
            feature_names=tuple(meta["feature_names"]),
            feature_kinds=tuple(meta["feature_kinds"]),
            normal_value=meta["normal_value"],
            attack_categories=frozenset(meta["attack_categories"]),
            normalization_stats=NormalizationStats.from_matrix(features),
        )
        parts[tag] = Dataset(
            schema=schema,
            features=features,
            labels=np.asarray(reader.json(meta["labels"]), dtype=object),
            name=meta["name"],
            partition_tag=tag,
            source_indices=(reader.array(meta["source_indices"])
                            if meta["source_indices"] else None),
        )
    return SplitDataset(parts["train"], parts["validation"], parts["test"],
                        reader.metadata["excluded_attack"])
