"""Voting-counter formulas, reputation and assembled matrix layout."""

import itertools

import numpy as np
import pytest

from idstack import learners
from idstack.dataset import dataset_from_arrays, normalize
from idstack.decision import fixed_threshold
from idstack.metafeatures import (
    DATA_F,
    FULL_F,
    META_F,
    ReputationVector,
    assemble_matrix,
    column_names,
    count_votes,
    reputation_from_validation,
    wcount_votes,
)


def wcount_oracle(bins, rep):
    """Direct per-term transcription of the weighted-count formula."""
    total = 0.0
    for b, r in zip(bins, rep):
        total += 0.5 * (1.0 - ((-1.0) ** b) * r)
    return total / len(bins)


def test_count_values():
    assert count_votes([1, 1]) == 2
    assert count_votes([0, 0, 0]) == 0
    assert count_votes([1, 0, 1, 1]) == 3


def test_wcount_worked_examples():
    rep = ReputationVector(np.array([0.2, 0.8]))
    assert wcount_votes([1, 1], rep) == pytest.approx(0.75)
    assert wcount_votes([1, 0], rep) == pytest.approx(0.35)
    assert wcount_votes([0, 0], ReputationVector(np.array([1.0, 1.0]))) == 0.0


def test_wcount_matches_brute_force_all_vote_vectors():
    rng = np.random.default_rng(8)
    for uk in (1, 2, 3, 4):
        for _ in range(1000 // (2 ** uk)):
            rep_values = rng.uniform(-1, 1, uk)
            rep = ReputationVector(rep_values)
            for bins in itertools.product((0, 1), repeat=uk):
                got = wcount_votes(list(bins), rep)
                want = wcount_oracle(bins, rep_values)
                assert abs(got - want) <= 1e-12


def test_wcount_range_property():
    rng = np.random.default_rng(3)
    for _ in range(300):
        uk = int(rng.integers(1, 14))
        rep = ReputationVector(rng.uniform(-1, 1, uk))
        bins = rng.integers(0, 2, uk)
        w = wcount_votes(bins, rep)
        assert 0.0 <= w <= 1.0


def test_wcount_complement_symmetry_exact():
    rng = np.random.default_rng(5)
    for _ in range(200):
        uk = int(rng.integers(1, 10))
        rep = ReputationVector(rng.uniform(-1, 1, uk))
        bins = rng.integers(0, 2, uk)
        assert wcount_votes(bins, rep) + wcount_votes(1 - bins, rep) == pytest.approx(1.0, abs=1e-15)


def test_wcount_extremes_need_perfect_reputation():
    rep = ReputationVector(np.array([1.0, 1.0, 1.0]))
    assert wcount_votes([1, 1, 1], rep) == 1.0
    assert wcount_votes([0, 0, 0], rep) == 0.0
    lesser = ReputationVector(np.array([1.0, 0.5, 1.0]))
    assert wcount_votes([1, 1, 1], lesser) < 1.0


def test_reputation_perfect_inverted_and_random():
    labels = np.array([1, 0, 0, 1])
    preds = np.array([
        [1, 0, 0, 1],   # perfect
        [0, 1, 1, 0],   # inverted
        [1, 0, 1, 0],   # tp=1 tn=1 fp=1 fn=1 -> 0
    ])
    rep = reputation_from_validation(preds, labels)
    np.testing.assert_allclose(rep.values, [1.0, -1.0, 0.0])


def test_reputation_single_class_is_zero_with_warning(caplog):
    with caplog.at_level("WARNING"):
        rep = reputation_from_validation(np.array([[1, 0], [0, 1]]), np.array([0, 0]))
    np.testing.assert_array_equal(rep.values, [0.0, 0.0])
    assert any("single-class" in r.message for r in caplog.records)


def test_reputation_bounds_enforced():
    with pytest.raises(ValueError):
        ReputationVector(np.array([1.5]))


def fitted_toy_ensemble():
    rng = np.random.default_rng(0)
    train = dataset_from_arrays(rng.uniform(0, 1, (60, 3)),
                                ["normal"] * 40 + ["atk"] * 20, "toy")
    train = normalize(train, train)
    specs = [learners.AlgorithmSpec("KNN", {"k": 3}),
             learners.AlgorithmSpec("KMeans", {"c": 2})]
    models = [learners.fit(s, train, seed=1) for s in specs]
    decisions = [fixed_threshold(0.1), fixed_threshold(0.2)]
    rep = ReputationVector(np.array([0.5, -0.2]))
    return train, models, decisions, rep


def test_assemble_column_arity_per_kind():
    train, models, decisions, rep = fitted_toy_ensemble()
    X_data, y, names = assemble_matrix(train, models, decisions, rep, DATA_F)
    assert X_data.shape == (60, 3) and len(names) == 3
    X_meta, _, meta_names = assemble_matrix(train, models, decisions, rep, META_F)
    assert X_meta.shape == (60, 2 * 2 + 2)
    X_full, _, full_names = assemble_matrix(train, models, decisions, rep, FULL_F)
    assert X_full.shape == (60, 3 + 2 * 2 + 2)
    assert full_names == list(train.schema.feature_names) + meta_names


def test_assemble_column_order_and_consistency():
    train, models, decisions, rep = fitted_toy_ensemble()
    X, y, names = assemble_matrix(train, models, decisions, rep, FULL_F)
    uk = len(models)
    d = train.n_features
    nums = X[:, d:d + uk]
    bins = X[:, d + uk:d + 2 * uk]
    counts = X[:, d + 2 * uk]
    wcounts = X[:, d + 2 * uk + 1]
    assert set(np.unique(bins)) <= {0.0, 1.0}
    np.testing.assert_array_equal(counts, bins.sum(axis=1))
    for r in range(len(X)):
        assert wcounts[r] == pytest.approx(wcount_oracle(bins[r].astype(int), rep.values))
    # num columns carry the raw model scores
    np.testing.assert_array_equal(nums[:, 0], models[0].score(train.features))
    # labels binarized: normal -> 0, attack -> 1
    np.testing.assert_array_equal(y, train.binary_labels())


def test_assemble_alignment_mismatch():
    train, models, decisions, rep = fitted_toy_ensemble()
    with pytest.raises(ValueError):
        assemble_matrix(train, models, decisions[:1], rep, META_F)


def test_column_names_uk13_arity():
    algorithms = [s.label() for s in learners.default_ensemble_specs(4)]
    names = column_names(("a", "b", "c"), algorithms, META_F)
    assert len(names) == 2 * 13 + 2
    assert names[-2:] == ["count", "wcount"]
    full = column_names(("a", "b", "c"), algorithms, FULL_F)
    assert len(full) == 3 + 28
