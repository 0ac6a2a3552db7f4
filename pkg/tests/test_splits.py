"""Variant protocol tests: exclusion soundness, stratification, determinism."""

import numpy as np
import pytest

from idstack.dataset import DataError, dataset_from_arrays
from idstack.splits import (
    SplitDataset,
    VariantSpec,
    all_variant_specs,
    load_split,
    make_variant,
    save_split,
)


def labeled_dataset(n_normal=400, n_a=150, n_b=80, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(0, 1, (n_normal + n_a + n_b, 3))
    y = ["normal"] * n_normal + ["A"] * n_a + ["B"] * n_b
    return dataset_from_arrays(X, y, "lab")


def test_excluded_attack_only_in_test():
    ds = labeled_dataset()
    split = make_variant(ds, VariantSpec("lab", "B", 0.5, 1))
    assert not np.any(split.train.labels == "B")
    assert not np.any(split.validation.labels == "B")
    assert np.count_nonzero(split.test.labels == "B") == 80
    assert np.any(split.train.labels == "A")


def test_same_seed_identical_partitions():
    ds = labeled_dataset()
    s1 = make_variant(ds, VariantSpec("lab", "A", 0.5, 9))
    s2 = make_variant(ds, VariantSpec("lab", "A", 0.5, 9))
    np.testing.assert_array_equal(s1.train.source_indices, s2.train.source_indices)
    np.testing.assert_array_equal(s1.test.source_indices, s2.test.source_indices)
    np.testing.assert_array_equal(s1.validation.source_indices,
                                  s2.validation.source_indices)


def test_different_seed_different_partitions():
    ds = labeled_dataset()
    s1 = make_variant(ds, VariantSpec("lab", "A", 0.5, 1))
    s2 = make_variant(ds, VariantSpec("lab", "A", 0.5, 2))
    assert not np.array_equal(s1.train.source_indices, s2.train.source_indices)
    assert len(s1.train) == len(s2.train)


def test_partitions_disjoint_and_exhaustive():
    ds = labeled_dataset()
    split = make_variant(ds, VariantSpec("lab", "B", 0.5, 4))
    merged = np.concatenate([split.train.source_indices,
                             split.validation.source_indices,
                             split.test.source_indices])
    assert len(np.unique(merged)) == len(merged) == len(ds)


def test_stratification_within_two_points():
    ds = labeled_dataset(n_normal=2000, n_a=800, n_b=400)
    split = make_variant(ds, VariantSpec("lab", None, 0.5, 3))
    for cls, total in (("normal", 2000), ("A", 800), ("B", 400)):
        in_fit = np.count_nonzero(split.train.labels == cls)
        in_val = np.count_nonzero(split.validation.labels == cls)
        frac = (in_fit + in_val) / total
        assert abs(frac - 0.5) <= 0.02, (cls, frac)


def test_validation_is_carved_from_train_side():
    ds = labeled_dataset()
    split = make_variant(ds, VariantSpec("lab", None, 0.5, 5))
    assert len(split.validation) == pytest.approx(0.1 * (len(split.train) + len(split.validation)), abs=3)
    # both classes present in validation when the dataset has them
    assert len(set(split.validation.labels.tolist())) >= 2


def test_exclude_unknown_attack_raises():
    ds = labeled_dataset()
    with pytest.raises(DataError, match="not in dataset"):
        make_variant(ds, VariantSpec("lab", "C", 0.5, 0))


def test_exclude_all_attacks_leaves_normal_only_train():
    rng = np.random.default_rng(0)
    X = rng.normal(0, 1, (300, 2))
    y = ["normal"] * 200 + ["onlyattack"] * 100
    ds = dataset_from_arrays(X, y, "single")
    split = make_variant(ds, VariantSpec("single", "onlyattack", 0.5, 2))
    assert set(split.train.labels.tolist()) == {"normal"}
    assert set(split.validation.labels.tolist()) == {"normal"}
    assert np.count_nonzero(split.test.labels == "onlyattack") == 100
    # cardinality: half the normals plus every attack point
    assert len(split.test) == 100 + 100


def test_partition_tags():
    ds = labeled_dataset()
    split = make_variant(ds, VariantSpec("lab", "A", 0.5, 0))
    assert split.train.partition_tag == "train"
    assert split.validation.partition_tag == "validation"
    assert split.test.partition_tag == "test"


def test_all_variant_specs_counts():
    ds = labeled_dataset()
    specs = all_variant_specs(ds)
    assert len(specs) == 3  # full + one per attack
    assert specs[0].excluded_attack is None
    assert [s.excluded_attack for s in specs[1:]] == ["A", "B"]


def test_unknown_fraction():
    ds = labeled_dataset(n_normal=100, n_a=50, n_b=50)
    split = make_variant(ds, VariantSpec("lab", "B", 0.5, 0))
    assert split.unknown_fraction() == pytest.approx(50 / len(split.test))


def test_split_leak_guard():
    ds = labeled_dataset()
    split = make_variant(ds, VariantSpec("lab", "B", 0.5, 0))
    bad_train = split.train.replace(labels=np.asarray(
        ["B"] * len(split.train), dtype=object))
    with pytest.raises(DataError):
        SplitDataset(bad_train, split.validation, split.test, "B")


def test_split_save_load_round_trip(tmp_path):
    ds = labeled_dataset()
    split = make_variant(ds, VariantSpec("lab", "A", 0.5, 8))
    path = tmp_path / "lab_A.split"
    save_split(split, path)
    back = load_split(path)
    assert back.excluded_attack == "A"
    for tag in ("train", "validation", "test"):
        a, b = getattr(split, tag), getattr(back, tag)
        np.testing.assert_array_equal(a.features, b.features)
        assert list(a.labels) == list(b.labels)
        assert b.partition_tag == tag
