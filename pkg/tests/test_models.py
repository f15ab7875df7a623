import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import blobs
from idsfusion.errors import DataError, PreconditionError
from idsfusion.models import (
    ForestConfig, GbmConfig, LogRegConfig, TrainedModel, TreeConfig, fit_forest, fit_gbm,
    fit_logreg, fit_model, fit_tree, load_model, log_loss_from_scores, logreg_objective,
    make_config, predict, predict_scores, raw_scores, save_model, sigmoid,
)


# -- decision tree -----------------------------------------------------------

def test_tree_hand_case():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0, 0, 1, 1])
    t = fit_tree(X, y=y).trees[0]
    assert t.feature.tolist() == [0, -1, -1]
    assert t.threshold[0] == 2.5
    assert t.value.tolist() == [0.5, 0.0, 1.0]


def test_tree_memorises_distinct_rows():
    rng = np.random.default_rng(0)
    X, y = blobs(rng, 200, 4)
    model = fit_tree(X, y=y)
    assert np.array_equal(predict(model, X), y)


def test_tree_depth_and_leaf_size_limits():
    rng = np.random.default_rng(1)
    X, y = blobs(rng, 300, 3, shift=0.5)
    t = fit_tree(X, TreeConfig(max_depth=3), y).trees[0]
    assert t.depths().max() <= 3
    t = fit_tree(X, TreeConfig(min_samples_leaf=10), y).trees[0]
    assert t.n_samples[t.feature < 0].min() >= 10


def test_tree_children_partition_parent():
    rng = np.random.default_rng(2)
    X, y = blobs(rng, 150, 3)
    t = fit_tree(X, y=y).trees[0]
    internal = np.flatnonzero(t.feature >= 0)
    assert np.array_equal(t.n_samples[internal], t.n_samples[t.left[internal]] + t.n_samples[t.right[internal]])


def test_predict_ties_go_to_benign():
    X = np.array([[0.0], [0.0]])
    model = fit_tree(X, y=np.array([0, 1]))
    assert predict_scores(model, X).tolist() == [0.5, 0.5]
    assert predict(model, X).tolist() == [0, 0]


# -- forest ------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(10))
def test_degenerate_forest_equals_tree(seed):
    rng = np.random.default_rng(seed)
    X, y = blobs(rng, 80, 4, shift=0.8)
    X = X.round(1)
    d = X.shape[1]
    forest = fit_forest(X, ForestConfig(1, 1, bootstrap=False, features_per_split=d, seed=seed), y)
    tree = fit_tree(X, y=y)
    Xt = rng.normal(size=(200, d)).round(1)
    assert np.array_equal(predict(forest, Xt), predict(tree, Xt))


def test_forest_is_seeded_and_thread_invariant():
    rng = np.random.default_rng(4)
    X, y = blobs(rng, 200, 6, shift=0.7)
    cfg = ForestConfig(n_estimators=12, min_samples_leaf=2, seed=9)
    a = fit_forest(X, cfg, y)
    b = fit_forest(X, cfg, y, n_jobs=4)
    for ta, tb in zip(a.trees, b.trees):
        assert ta.to_dict() == tb.to_dict()
    c = fit_forest(X, ForestConfig(n_estimators=12, min_samples_leaf=2, seed=10), y)
    assert any(ta.to_dict() != tc.to_dict() for ta, tc in zip(a.trees, c.trees))


def test_forest_scores_are_vote_fractions():
    rng = np.random.default_rng(5)
    X, y = blobs(rng, 100, 3)
    model = fit_forest(X, ForestConfig(n_estimators=7, seed=1), y)
    s = predict_scores(model, X)
    assert np.allclose(s * 7, np.round(s * 7))


def test_features_per_split_bounds():
    X, y = blobs(np.random.default_rng(0), 20, 3)
    with pytest.raises(PreconditionError):
        fit_forest(X, ForestConfig(n_estimators=1, features_per_split=4), y)


# -- gradient boosting -------------------------------------------------------

@pytest.mark.parametrize("seed", range(8))
def test_gbm_loss_is_monotone(seed):
    rng = np.random.default_rng(seed)
    X, y = blobs(rng, 150, 4, shift=0.6, frac=rng.uniform(0.2, 0.8))
    model = fit_gbm(X, GbmConfig(n_estimators=30, max_depth=3, learning_rate=0.3), y)
    h = np.asarray(model.history)
    assert np.all(np.diff(h) <= 1e-9)
    assert h[-1] == pytest.approx(log_loss_from_scores(y, raw_scores(model, X)), abs=1e-12)


def test_gbm_base_score():
    X = np.arange(8.0)[:, None]
    assert fit_gbm(X, GbmConfig(n_estimators=1), np.array([0, 1] * 4)).base_score == 0.0
    y = np.array([1, 0, 0, 0, 0, 0, 0, 0])
    assert fit_gbm(X, GbmConfig(n_estimators=1), y).base_score == pytest.approx(math.log(1 / 7))


def test_gbm_single_leaf_weight():
    # a depth-0 tree is one Newton step: w = -G / (H + lambda)
    y = np.array([1, 1, 1, 0])
    X = np.zeros((4, 1))
    model = fit_gbm(X, GbmConfig(n_estimators=1, max_depth=0, l2_leaf_regularization=2.0), y)
    p = 0.75
    G = 4 * p - 3
    H = 4 * p * (1 - p)
    assert model.trees[0].value[0] == pytest.approx(-G / (H + 2.0), abs=1e-15)


def test_gbm_needs_both_classes():
    with pytest.raises(PreconditionError):
        fit_gbm(np.zeros((3, 1)), GbmConfig(n_estimators=1), np.zeros(3, int))


def test_sigmoid_is_stable():
    z = np.array([-1000.0, -1.0, 0.0, 1.0, 1000.0])
    s = sigmoid(z)
    assert np.isfinite(s).all() and s[2] == 0.5
    assert s[0] == 0.0 and s[-1] == 1.0
    assert s[1] == pytest.approx(1 - s[3])


# -- logistic regression -----------------------------------------------------

@pytest.mark.parametrize("seed", range(6))
def test_logreg_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(30, 4))
    y = rng.integers(0, 2, 30)
    w, b, C = rng.normal(size=4), float(rng.normal()), 10 ** rng.uniform(-2, 2)
    _, gw, gb = logreg_objective(w, b, Z, y, C)
    eps = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = eps
        num = (logreg_objective(w + e, b, Z, y, C)[0] - logreg_objective(w - e, b, Z, y, C)[0]) / (2 * eps)
        assert num == pytest.approx(gw[j], rel=1e-4, abs=1e-8)
    num = (logreg_objective(w, b + eps, Z, y, C)[0] - logreg_objective(w, b - eps, Z, y, C)[0]) / (2 * eps)
    assert num == pytest.approx(gb, rel=1e-4, abs=1e-8)


def test_logreg_zero_weights_score_half():
    X, y = blobs(np.random.default_rng(0), 40, 3)
    model = fit_logreg(X, LogRegConfig(max_iterations=1), y)
    # first iteration only records the loss at w=0 before stepping
    model.weights[:] = 0.0
    model.bias = 0.0
    assert np.all(predict_scores(model, X) == 0.5)


def test_logreg_learns_and_loss_decreases():
    X, y = blobs(np.random.default_rng(1), 300, 4, shift=2.0)
    model = fit_logreg(X, LogRegConfig(C=1.0), y)
    assert np.all(np.diff(model.history) <= 1e-12)
    assert np.mean(predict(model, X) == y) > 0.8


def test_logreg_constant_feature_stays_zero():
    X, y = blobs(np.random.default_rng(2), 100, 3)
    X[:, 1] = 7.0
    model = fit_logreg(X, LogRegConfig(), y)
    assert model.weights[1] == 0.0 and model.scale[1] == 1.0


# -- configuration and persistence ------------------------------------------

def test_make_config_validation():
    assert make_config("gbm", {"max_depth": 5}, seed=3) == GbmConfig(max_depth=5, seed=3)
    with pytest.raises(PreconditionError):
        make_config("gbm", {"depth": 5})
    with pytest.raises(PreconditionError):
        make_config("logreg", {"penalty": "l1"})
    with pytest.raises(PreconditionError):
        make_config("svm")


@pytest.mark.parametrize("variant,params", [
    ("tree", {}), ("forest", {"n_estimators": 5}),
    ("gbm", {"n_estimators": 5}), ("logreg", {"C": 1.0}),
])
def test_model_file_round_trip(tmp_path, variant, params):
    rng = np.random.default_rng(3)
    X, y = blobs(rng, 120, 5)
    model = fit_model(variant, X, params, seed=1, y=y)
    path = tmp_path / f"{variant}.json"
    save_model(model, path)
    back = load_model(path)
    Xt = rng.normal(size=(50, 5))
    assert np.array_equal(predict_scores(back, Xt), predict_scores(model, Xt))
    save_model(back, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_load_rejects_other_formats(tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"format": "other", "version": 1}')
    with pytest.raises(DataError):
        load_model(path)


def test_feature_count_mismatch():
    X, y = blobs(np.random.default_rng(0), 30, 3)
    model = fit_tree(X, y=y)
    with pytest.raises(DataError, match="expects 3 features"):
        predict(model, np.zeros((2, 4)))


@given(st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_scores_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    X, y = blobs(rng, 40, 2)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    for variant, params in (("gbm", {"n_estimators": 3}), ("logreg", {}), ("forest", {"n_estimators": 3})):
        s = predict_scores(fit_model(variant, X, params, 0, y), X)
        assert np.all((s >= 0) & (s <= 1))


def test_gbm_without_regularisation_survives_saturation():
    # separable data drives probabilities to exactly 0/1, so hessians vanish
    X = np.r_[np.zeros(20), np.ones(20)][:, None]
    y = np.r_[np.zeros(20, int), np.ones(20, int)]
    model = fit_gbm(X, GbmConfig(n_estimators=60, max_depth=2, learning_rate=1.0, l2_leaf_regularization=0.0), y)
    assert np.all(np.isfinite(model.history))
    assert np.array_equal(predict(model, X), y)


def test_separable_pair_splits_at_half():
    X, y = np.array([[0.0], [1.0]]), np.array([0, 1])
    model = fit_tree(X, y=y)
    assert model.trees[0].threshold[0] == 0.5
    assert np.array_equal(predict(model, X), y)


def test_pure_node_is_a_leaf():
    model = fit_tree(np.array([[0.0], [1.0], [2.0]]), y=np.array([1, 1, 1]))
    assert model.trees[0].n_nodes == 1
    assert predict(model, np.array([[5.0]])).tolist() == [1]


def test_gini_gain_hand_case():
    from idsfusion import kernels
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    y = np.array([0, 0, 1, 1])
    idx = np.arange(4, dtype=np.int64)
    _, _, weighted = kernels.gini_split(X, y, idx, np.array([0]), 1)
    parent = 1 - 0.5**2 - 0.5**2
    assert parent - weighted / 4 == 0.5


def _stump(leaf_left, leaf_right):
    from idsfusion.models import Tree
    return Tree(np.array([0, -1, -1]), np.array([0.5, 0, 0]), np.array([1, -1, -1]),
                np.array([2, -1, -1]), np.array([0.5, leaf_left, leaf_right]), np.array([2, 1, 1]))


def test_forest_majority_vote():
    trees = [_stump(1.0, 0.0), _stump(1.0, 0.0), _stump(0.0, 1.0)]
    model = TrainedModel("forest", ForestConfig(n_estimators=3), 1, trees=trees)
    X = np.array([[0.0]])
    assert predict_scores(model, X).tolist() == [2 / 3]
    assert predict(model, X).tolist() == [1]


def test_forest_of_identical_stumps_equals_stump():
    forest = TrainedModel("forest", ForestConfig(n_estimators=3), 1, trees=[_stump(0.0, 1.0)] * 3)
    tree = TrainedModel("tree", TreeConfig(), 1, trees=[_stump(0.0, 1.0)])
    X = np.linspace(-1, 2, 13)[:, None]
    assert np.array_equal(predict(forest, X), predict(tree, X))


def test_separable_cases_fit_exactly():
    X, y = np.array([[0.0], [1.0]]), np.array([0, 1])
    assert np.array_equal(predict(fit_gbm(X, GbmConfig(n_estimators=10), y), X), y)
    X = np.linspace(-1, 1, 20)[:, None]
    y = (X[:, 0] > 0).astype(int)
    assert np.array_equal(predict(fit_logreg(X, LogRegConfig(C=100.0), y), X), y)


@pytest.mark.parametrize("variant", ["tree", "forest", "gbm", "logreg"])
def test_zero_rows_predict_empty(variant):
    X, y = blobs(np.random.default_rng(0), 30, 2)
    model = fit_model(variant, X, {"n_estimators": 2} if variant in ("forest", "gbm") else {}, 0, y)
    assert predict(model, np.zeros((0, 2))).shape == (0,)


def _walk(tree, row):
    node = 0
    while tree["feature"][node] >= 0:
        go_left = row[tree["feature"][node]] <= tree["threshold"][node]
        node = tree["left"][node] if go_left else tree["right"][node]
    return tree["value"][node]


def test_gbm_prediction_recomputed_from_file(tmp_path):
    import json
    rng = np.random.default_rng(6)
    X, y = blobs(rng, 120, 3, shift=0.8)
    model = fit_gbm(X, GbmConfig(n_estimators=15, max_depth=3, learning_rate=0.3), y)
    save_model(model, tmp_path / "gbm.json")
    saved = json.loads((tmp_path / "gbm.json").read_text())
    Xt = rng.normal(size=(60, 3))
    expected = []
    for row in Xt:
        f = saved["base_score"] + sum(saved["config"]["learning_rate"] * _walk(t, row) for t in saved["trees"])
        expected.append(int(1 / (1 + math.exp(-f)) > 0.5))
    assert predict(model, Xt).tolist() == expected


def test_base_score_shift_never_lowers_scores():
    rng = np.random.default_rng(9)
    X, y = blobs(rng, 100, 3)
    model = fit_gbm(X, GbmConfig(n_estimators=10), y)
    Xt = rng.normal(size=(50, 3))
    before = predict_scores(model, Xt)
    model.base_score += 0.25
    assert np.all(predict_scores(model, Xt) >= before)
