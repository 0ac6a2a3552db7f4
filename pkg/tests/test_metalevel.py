"""Meta-level classifiers: Gini oracle, forest determinism, KNN exactness,
Gaussian naive Bayes posteriors."""

import itertools

import numpy as np
import pytest

from idstack.metalevel import (
    DEFAULT_META_SPEC,
    MetaClassifierSpec,
    default_meta_grid,
    fit_meta,
    gini_best_split,
    meta_model_from_payload,
)


def gini_oracle(X, y):
    """Exhaustive search over every (feature, midpoint) split."""
    n, d = X.shape
    best = None
    for f in range(d):
        values = np.unique(X[:, f])
        for a, b in zip(values[:-1], values[1:]):
            thr = (a + b) / 2.0
            if thr >= b:
                thr = a
            left = y[X[:, f] <= thr]
            right = y[X[:, f] > thr]
            g = 0.0
            for part in (left, right):
                p = part.mean() if len(part) else 0.0
                g += len(part) / n * (1.0 - p * p - (1.0 - p) ** 2)
            if best is None or g < best[0] - 1e-15:
                best = (g, f, thr)
    return best


def test_root_split_matches_exhaustive_gini_search():
    rng = np.random.default_rng(2)
    for trial in range(25):
        n = int(rng.integers(8, 50))
        d = int(rng.integers(1, 5))
        X = np.round(rng.normal(0, 1, (n, d)), 2)
        y = rng.integers(0, 2, n)
        if y.min() == y.max():
            continue
        got = gini_best_split(X, y, np.arange(d))
        want = gini_oracle(X, y)
        if want is None:
            assert got is None
            continue
        assert got[0] == pytest.approx(want[0], abs=1e-12), trial


def test_dt_depth_one_separable():
    X = np.array([[0.0], [0.1], [0.9], [1.0]])
    y = np.array([0, 0, 1, 1])
    model = fit_meta(MetaClassifierSpec("DecisionTree", {"max_depth": 1}), X, y)
    preds, scores = model.predict(X)
    np.testing.assert_array_equal(preds, y)


def xor_instance():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    return X, y


def test_dt_xor_depth_property():
    X, y = xor_instance()
    deep = fit_meta(MetaClassifierSpec("DecisionTree", {"max_depth": 2}), X, y)
    assert (deep.predict(X)[0] == y).mean() == 1.0
    shallow = fit_meta(MetaClassifierSpec("DecisionTree", {"max_depth": 1}), X, y)
    assert (shallow.predict(X)[0] == y).mean() <= 0.75
    # exhaustive check: no depth-1 split separates XOR
    for f, thr in itertools.product((0, 1), (0.5,)):
        left, right = y[X[:, f] <= thr], y[X[:, f] > thr]
        assert 0.0 < left.mean() < 1.0 or 0.0 < right.mean() < 1.0


def test_rf_training_accuracy_on_separable_data():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 0.2, (30, 1)), rng.normal(3, 0.2, (30, 1))])
    y = np.array([0] * 30 + [1] * 30)
    model = fit_meta(MetaClassifierSpec("RandomForest",
                                        {"trees": 10, "max_depth": None}, seed=4), X, y)
    preds, _ = model.predict(X)
    assert (preds == y).mean() == 1.0


def test_rf_deterministic_given_seed():
    rng = np.random.default_rng(1)
    X = rng.normal(0, 1, (120, 4))
    y = (X[:, 0] + rng.normal(0, 0.4, 120) > 0).astype(int)
    spec = MetaClassifierSpec("RandomForest", {"trees": 20, "max_depth": None}, seed=9)
    a = fit_meta(spec, X, y)
    b = fit_meta(spec, X, y)
    q = rng.normal(0, 1, (30, 4))
    np.testing.assert_array_equal(a.anomaly_scores(q), b.anomaly_scores(q))
    different = fit_meta(MetaClassifierSpec("RandomForest",
                                            {"trees": 20, "max_depth": None}, seed=10), X, y)
    assert not np.array_equal(a.anomaly_scores(q), different.anomaly_scores(q))


def test_rf_vote_fraction_semantics():
    rng = np.random.default_rng(3)
    X = rng.normal(0, 1, (60, 2))
    y = (X[:, 0] > 0).astype(int)
    model = fit_meta(MetaClassifierSpec("RandomForest",
                                        {"trees": 10, "max_depth": 3}, seed=0), X, y)
    scores = model.anomaly_scores(X)
    votes = scores * 10
    np.testing.assert_allclose(votes, np.round(votes), atol=1e-9)
    preds, s = model.predict(X)
    np.testing.assert_array_equal(preds, (s > 0.5).astype(int))


def test_rf_duplicate_trees_invariance():
    rng = np.random.default_rng(5)
    X = rng.normal(0, 1, (50, 2))
    y = (X[:, 0] > 0).astype(int)
    model = fit_meta(MetaClassifierSpec("RandomForest",
                                        {"trees": 5, "max_depth": None}, seed=2), X, y)
    q = rng.normal(0, 1, (20, 2))
    base_preds, base_scores = model.predict(q)
    model.trees = model.trees * 3  # duplicate every tree twice more
    dup_preds, dup_scores = model.predict(q)
    np.testing.assert_array_equal(base_preds, dup_preds)
    np.testing.assert_allclose(base_scores, dup_scores, atol=1e-12)


def knn_brute_force(train, labels, queries, k):
    scores = []
    for q in queries:
        d = np.sqrt(((train - q) ** 2).sum(axis=1))
        order = sorted(range(len(train)), key=lambda i: (d[i], i))[:k]
        scores.append(labels[order].mean())
    return np.array(scores)


def test_knn_meta_matches_brute_force():
    rng = np.random.default_rng(7)
    X = rng.normal(0, 2, (500, 3))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    queries = rng.normal(0, 2, (50, 3))
    for k in (1, 3, 10, 30):
        model = fit_meta(MetaClassifierSpec("KNN", {"k": k}), X, y)
        # oracle works in the model's normalized space
        lo, hi = X.min(axis=0), X.max(axis=0)
        tn = (X - lo) / (hi - lo)
        qn = (queries - lo) / (hi - lo)
        want = knn_brute_force(tn, y, qn, k)
        np.testing.assert_allclose(model.anomaly_scores(queries), want, atol=1e-12)


def test_knn_neighbor_fraction_example():
    X = np.array([[0.0], [0.1], [0.2], [5.0]])
    y = np.array([1, 1, 0, 0])
    model = fit_meta(MetaClassifierSpec("KNN", {"k": 3}), X, y)
    preds, scores = model.predict(np.array([[0.05]]))
    assert scores[0] == pytest.approx(2.0 / 3.0)
    assert preds[0] == 1


def test_gnb_posterior_normalization_and_tie():
    rng = np.random.default_rng(11)
    X = np.vstack([rng.normal(-2, 1, (40, 2)), rng.normal(2, 1, (40, 2))])
    y = np.array([0] * 40 + [1] * 40)
    model = fit_meta(MetaClassifierSpec("GaussianNB", {}), X, y)
    q = rng.normal(0, 2, (30, 2))
    p1 = model.anomaly_scores(q)
    assert np.all((p1 >= 0) & (p1 <= 1))
    # symmetric classes, query at the exact midpoint: posterior 0.5, tie -> 0
    X_sym = np.array([[-1.0], [-2.0], [-3.0], [1.0], [2.0], [3.0]])
    y_sym = np.array([0, 0, 0, 1, 1, 1])
    sym = fit_meta(MetaClassifierSpec("GaussianNB", {}), X_sym, y_sym)
    preds, scores = sym.predict(np.array([[0.0]]))
    assert scores[0] == pytest.approx(0.5, abs=1e-12)
    assert preds[0] == 0


def test_gnb_posteriors_sum_to_one():
    rng = np.random.default_rng(13)
    X = rng.normal(0, 1, (60, 3))
    y = (X[:, 2] > 0.2).astype(int)
    model = fit_meta(MetaClassifierSpec("GaussianNB", {}), X, y)
    q = rng.normal(0, 1, (25, 3))
    p1 = model.anomaly_scores(q)
    # complement computed by swapping the class labels
    flipped = fit_meta(MetaClassifierSpec("GaussianNB", {}), X, 1 - y)
    p0 = flipped.anomaly_scores(q)
    np.testing.assert_allclose(p1 + p0, 1.0, atol=1e-9)


def test_single_class_training_constant_classifier(caplog):
    X = np.random.default_rng(0).normal(0, 1, (10, 2))
    with caplog.at_level("WARNING"):
        model = fit_meta(DEFAULT_META_SPEC, X, np.ones(10, dtype=int))
    preds, scores = model.predict(X)
    np.testing.assert_array_equal(preds, 1)
    np.testing.assert_array_equal(scores, 1.0)


def test_arity_mismatch_rejected():
    X = np.random.default_rng(0).normal(0, 1, (20, 3))
    y = (X[:, 0] > 0).astype(int)
    model = fit_meta(MetaClassifierSpec("DecisionTree", {"max_depth": None}), X, y)
    with pytest.raises(ValueError, match="features"):
        model.predict(np.zeros((2, 4)))


def test_default_grid_matches_published_sets():
    grid = default_meta_grid()
    knn_ks = [s.params["k"] for s in grid if s.kind == "KNN"]
    assert knn_ks == [1, 3, 10, 30, 100]
    dt_depths = [s.params["max_depth"] for s in grid if s.kind == "DecisionTree"]
    assert dt_depths == [5, 20, None]
    rf = [(s.params["trees"], s.params["max_depth"])
          for s in grid if s.kind == "RandomForest"]
    assert sorted(set(t for t, _ in rf)) == [10, 30, 100]
    assert set(d for _, d in rf) == {None, 10}
    assert len(rf) == 6
    assert sum(1 for s in grid if s.kind == "GaussianNB") == 1


@pytest.mark.parametrize("kind,params", [
    ("DecisionTree", {"max_depth": 3}),
    ("RandomForest", {"trees": 5, "max_depth": None}),
    ("KNN", {"k": 3}),
    ("GaussianNB", {}),
])
def test_payload_round_trip(kind, params):
    rng = np.random.default_rng(21)
    X = rng.normal(0, 1, (40, 3))
    y = (X[:, 0] > 0).astype(int)
    spec = MetaClassifierSpec(kind, params, seed=6)
    model = fit_meta(spec, X, y)
    rebuilt = meta_model_from_payload(spec, model.payload_scalars(),
                                      model.payload_arrays())
    q = rng.normal(0, 1, (15, 3))
    np.testing.assert_array_equal(model.anomaly_scores(q), rebuilt.anomaly_scores(q))
