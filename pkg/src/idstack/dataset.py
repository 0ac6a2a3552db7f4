"""Dataset ingestion, typing and min-max normalization.

A dataset is a dense float64 feature matrix plus a per-row label. Labels keep
their raw category string; the schema records which value means "no attack".
Categorical columns are dropped at ingestion, so every retained feature is
ordinal and finite.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass

import numpy as np

from .archive import ArchiveError, ArchiveReader, ArchiveWriter

logger = logging.getLogger(__name__)

CACHE_FORMAT_VERSION = "1"

ORDINAL = "ordinal"
CATEGORICAL_DROPPED = "categorical-dropped"


class DataError(Exception):
    """Raised for unusable input data (missing columns, empty result, ...)."""


@dataclass(frozen=True)
class DataPoint:
    """One labeled observation: a feature vector and its class label."""

    features: np.ndarray
    label: str


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature min/max, taken from whichever partition trains the models."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.minimum > self.maximum):
            raise ValueError("per-feature minimum must not exceed maximum")

    @property
    def constant_mask(self) -> np.ndarray:
        return self.maximum == self.minimum

    @staticmethod
    def from_matrix(features: np.ndarray) -> "NormalizationStats":
        return NormalizationStats(features.min(axis=0), features.max(axis=0))


@dataclass(frozen=True)
class DatasetSchema:
    feature_names: tuple[str, ...]
    feature_kinds: tuple[str, ...]  # per ORIGINAL csv column, label excluded
    normal_value: str
    attack_categories: frozenset[str]
    normalization_stats: NormalizationStats

    @property
    def ordinal_names(self) -> tuple[str, ...]:
        return self.feature_names


@dataclass(frozen=True)
class Dataset:
    """Immutable labeled dataset; `partition_tag` tracks split provenance."""

    schema: DatasetSchema
    features: np.ndarray
    labels: np.ndarray  # dtype=object array of str
    name: str
    partition_tag: str | None = None
    source_indices: np.ndarray | None = None
    ingest_skipped_rows: int = 0

    def __post_init__(self) -> None:
        if len(self.features) == 0:
            raise DataError(f"dataset {self.name!r} has no points")
        if self.features.shape[1] != len(self.schema.feature_names):
            raise DataError("feature matrix width does not match schema")
        if len(self.labels) != len(self.features):
            raise DataError("label count does not match point count")
        if not np.all(np.isfinite(self.features)):
            raise DataError("feature values must all be finite")
        seen = set(self.labels.tolist()) - {self.schema.normal_value}
        if not seen <= set(self.schema.attack_categories):
            raise DataError(f"labels outside schema categories: {sorted(seen - set(self.schema.attack_categories))}")
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return len(self.features)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def point(self, i: int) -> DataPoint:
        return DataPoint(self.features[i], str(self.labels[i]))

    def iter_points(self):
        for i in range(len(self)):
            yield self.point(i)

    def binary_labels(self) -> np.ndarray:
        """0 for normal, 1 for any attack category."""
        return (self.labels != self.schema.normal_value).astype(np.int64)

    def replace(self, **changes) -> "Dataset":
        fields_now = {
            "schema": self.schema,
            "features": self.features,
            "labels": self.labels,
            "name": self.name,
            "partition_tag": self.partition_tag,
            "source_indices": self.source_indices,
            "ingest_skipped_rows": self.ingest_skipped_rows,
        }
        fields_now.update(changes)
        return Dataset(**fields_now)


def dataset_from_arrays(
    features: np.ndarray,
    labels,
    name: str,
    normal_value: str = "normal",
    feature_names: tuple[str, ...] | None = None,
    partition_tag: str | None = None,
    source_indices: np.ndarray | None = None,
) -> Dataset:
    """Build a Dataset from in-memory arrays (tests, synthetic scenarios)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DataError("feature matrix must be 2-D")
    if len(features) == 0:
        raise DataError(f"dataset {name!r} has no points")
    labels = np.asarray(list(labels), dtype=object)
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(features.shape[1]))
    categories = frozenset(str(v) for v in set(labels.tolist()) if v != normal_value)
    schema = DatasetSchema(
        feature_names=tuple(feature_names),
        feature_kinds=tuple(ORDINAL for _ in feature_names),
        normal_value=normal_value,
        attack_categories=categories,
        normalization_stats=NormalizationStats.from_matrix(features),
    )
    return Dataset(
        schema=schema,
        features=features,
        labels=labels,
        name=name,
        partition_tag=partition_tag,
        source_indices=source_indices,
    )


def ingest_csv(path, label_column: str, normal_value: str) -> Dataset:
    """Parse a flattened CSV into a Dataset.

    Columns whose values fail to parse as numbers in more than half of the
    rows are tagged categorical and dropped. Remaining columns are ordinal;
    rows with an unparseable or non-finite ordinal value are skipped and
    counted. Raises DataError if the label column is missing or nothing
    survives parsing.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
        raw_rows = [row for row in reader if row]

    if not raw_rows:
        raise DataError(f"{path}: no data rows")

    feature_cols = [i for i in range(len(header)) if i != label_idx]
    kinds = _classify_columns(raw_rows, feature_cols, len(header))
    ordinal_cols = [c for c, kind in zip(feature_cols, kinds) if kind == ORDINAL]
    if not ordinal_cols:
        raise DataError(f"{path}: no ordinal feature columns survive typing")

    rows: list[list[float]] = []
    labels: list[str] = []
    skipped = 0
    for line_no, row in enumerate(raw_rows, start=2):
        if len(row) != len(header):
            skipped += 1
            logger.warning("%s line %d: expected %d fields, got %d; row skipped",
                           path, line_no, len(header), len(row))
            continue
        values = []
        ok = True
        for c in ordinal_cols:
            try:
                v = float(row[c])
            except ValueError:
                ok = False
            else:
                ok = np.isfinite(v)
            if not ok:
                logger.warning("%s line %d: bad value %r in column %r; row skipped",
                               path, line_no, row[c], header[c])
                break
            values.append(v)
        if not ok:
            skipped += 1
            continue
        rows.append(values)
        labels.append(row[label_idx].strip())

    if not rows:
        raise DataError(f"{path}: every row was skipped during parsing")
    if skipped:
        logger.warning("%s: skipped %d unparseable rows", path, skipped)

    features = np.array(rows, dtype=np.float64)
    label_arr = np.asarray(labels, dtype=object)
    categories = frozenset(v for v in set(labels) if v != normal_value)
    if not categories:
        logger.warning("%s: label column contains only %r; no attack categories",
                       path, normal_value)
    schema = DatasetSchema(
        feature_names=tuple(header[c] for c in ordinal_cols),
        feature_kinds=tuple(kinds),
        normal_value=normal_value,
        attack_categories=categories,
        normalization_stats=NormalizationStats.from_matrix(features),
    )
    return Dataset(
        schema=schema,
        features=features,
        labels=label_arr,
        name=os.path.splitext(os.path.basename(os.fspath(path)))[0],
        ingest_skipped_rows=skipped,
    )


def _classify_columns(rows: list[list[str]], feature_cols: list[int], width: int) -> list[str]:
    numeric = np.zeros(len(feature_cols), dtype=np.int64)
    total = 0
    for row in rows:
        if len(row) != width:
            continue
        total += 1
        for j, c in enumerate(feature_cols):
            try:
                float(row[c])
            except ValueError:
                continue
            numeric[j] += 1
    if total == 0:
        total = 1
    # a column is ordinal unless non-numeric strings dominate (> 50% of rows)
    return [ORDINAL if numeric[j] * 2 >= total else CATEGORICAL_DROPPED
            for j in range(len(feature_cols))]


def normalize(dataset: Dataset, stats_source: Dataset | NormalizationStats) -> Dataset:
    """Min-max scale every feature to [0, 1] using the source's min/max.

    Constant features map to 0 and out-of-range values clip to [0, 1], so
    models fitted on the stats source never see test values outside the
    unit cube. Stats come from the source's current point values.
    """
    if isinstance(stats_source, Dataset):
        if stats_source.schema.feature_names != dataset.schema.feature_names:
            raise DataError("schema mismatch between dataset and stats source")
        stats = NormalizationStats.from_matrix(stats_source.features)
    else:
        stats = stats_source
    if len(stats.minimum) != dataset.n_features:
        raise DataError("stats arity does not match dataset")
    scaled = apply_normalization(dataset.features, stats)
    schema = DatasetSchema(
        feature_names=dataset.schema.feature_names,
        feature_kinds=dataset.schema.feature_kinds,
        normal_value=dataset.schema.normal_value,
        attack_categories=dataset.schema.attack_categories,
        normalization_stats=NormalizationStats.from_matrix(scaled),
    )
    return Dataset(
        schema=schema,
        features=scaled,
        labels=dataset.labels,
        name=dataset.name,
        partition_tag=dataset.partition_tag,
        source_indices=dataset.source_indices,
        ingest_skipped_rows=dataset.ingest_skipped_rows,
    )


def apply_normalization(features: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    span = stats.maximum - stats.minimum
    safe_span = np.where(span == 0, 1.0, span)
    scaled = (features - stats.minimum) / safe_span
    scaled[:, stats.constant_mask] = 0.0
    return np.clip(scaled, 0.0, 1.0)


def save_cache(dataset: Dataset, path) -> None:
    """Write the columnar binary cache; round trip is bit-exact."""
    writer = ArchiveWriter(CACHE_FORMAT_VERSION)
    meta = {
        "name": dataset.name,
        "feature_names": list(dataset.schema.feature_names),
        "feature_kinds": list(dataset.schema.feature_kinds),
        "normal_value": dataset.schema.normal_value,
        "attack_categories": sorted(dataset.schema.attack_categories),
        "partition_tag": dataset.partition_tag,
        "ingest_skipped_rows": dataset.ingest_skipped_rows,
        "features": writer.add_array(dataset.features),
        "labels": writer.add_json(list(map(str, dataset.labels))),
        "stats_min": writer.add_array(dataset.schema.normalization_stats.minimum),
        "stats_max": writer.add_array(dataset.schema.normalization_stats.maximum),
    }
    if dataset.source_indices is not None:
        meta["source_indices"] = writer.add_array(dataset.source_indices)
    writer.write(path, meta)


def load_cache(path) -> Dataset:
    reader = ArchiveReader(path, CACHE_FORMAT_VERSION)
    meta = reader.metadata
    stats = NormalizationStats(reader.array(meta["stats_min"]),
                               reader.array(meta["stats_max"]))
    schema = DatasetSchema(
        feature_names=tuple(meta["feature_names"]),
        feature_kinds=tuple(meta["feature_kinds"]),
        normal_value=meta["normal_value"],
        attack_categories=frozenset(meta["attack_categories"]),
        normalization_stats=stats,
    )
    source = reader.array(meta["source_indices"]) if "source_indices" in meta else None
    return Dataset(
        schema=schema,
        features=reader.array(meta["features"]),
        labels=np.asarray(reader.json(meta["labels"]), dtype=object),
        name=meta["name"],
        partition_tag=meta["partition_tag"],
        source_indices=source,
        ingest_skipped_rows=meta["ingest_skipped_rows"],
    )
