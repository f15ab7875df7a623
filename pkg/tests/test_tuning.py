import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import blobs
from idsfusion.errors import PreconditionError
from idsfusion.preprocess import FeatureMatrix, derive_seed
from idsfusion.tuning import (
    DEFAULT_SPACES, REPORTED_OPTIMA, ParamSpace, SearchConfig, cross_val_accuracy,
    default_space, random_search, read_ledger, stratified_kfold, write_ledger,
)


@pytest.fixture(scope="module")
def data():
    X, y = blobs(np.random.default_rng(7), 160, 4, shift=0.9)
    return FeatureMatrix(X, tuple("abcd"), y)


def test_default_spaces_contain_reported_optima():
    for variant, optimum in REPORTED_OPTIMA.items():
        assert optimum in default_space(variant)
    assert default_space("gbm").size() == 27
    assert default_space("logreg").size() == 5
    assert default_space("forest").size() == 9
    assert set(DEFAULT_SPACES) == {"gbm", "logreg", "forest"}


def test_param_space_validation():
    with pytest.raises(PreconditionError):
        ParamSpace("gbm", {"depth": [1]})
    with pytest.raises(PreconditionError):
        ParamSpace("gbm", {"max_depth": []})


def test_assignments_cartesian_order():
    space = ParamSpace("gbm", {"max_depth": [1, 2], "learning_rate": [0.1, 0.3]})
    assert space.assignments() == [
        {"max_depth": 1, "learning_rate": 0.1}, {"max_depth": 1, "learning_rate": 0.3},
        {"max_depth": 2, "learning_rate": 0.1}, {"max_depth": 2, "learning_rate": 0.3},
    ]


@given(st.integers(3, 200), st.integers(3, 200), st.integers(2, 3), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_kfold_is_stratified_and_balanced(n0, n1, k, seed):
    labels = np.r_[np.zeros(n0, int), np.ones(n1, int)]
    folds = stratified_kfold(labels, k, seed)
    sizes = np.bincount(folds, minlength=k)
    assert sizes.max() - sizes.min() <= 1
    for c in (0, 1):
        per = np.bincount(folds[labels == c], minlength=k)
        assert per.max() - per.min() <= 1
    assert np.array_equal(folds, stratified_kfold(labels, k, seed))


def test_kfold_preconditions():
    with pytest.raises(PreconditionError):
        stratified_kfold(np.array([0, 0, 1, 1]), 3)
    with pytest.raises(PreconditionError):
        stratified_kfold(np.array([0, 1] * 5), 1)


def test_search_is_exhaustive_on_small_space(data):
    space = ParamSpace("gbm", {"n_estimators": [2, 10], "max_depth": [1, 3]})
    cfg = SearchConfig(n_iter=4, folds=3, seed=5)
    result = random_search("gbm", space, cfg, data)
    seen = sorted(tuple(sorted(c.params.items())) for c in result.candidates)
    assert seen == sorted(tuple(sorted(p.items())) for p in space.assignments())
    folds = stratified_kfold(data.labels, 3, derive_seed(5, 2))
    brute = {tuple(sorted(p.items())): cross_val_accuracy("gbm", p, data, folds, 5)[1]
             for p in space.assignments()}
    assert result.best_mean == max(brute.values())
    assert brute[tuple(sorted(result.best_params.items()))] == result.best_mean
    assert result.model is not None


def test_search_is_seeded(data):
    space = default_space("logreg")
    a = random_search("logreg", space, SearchConfig(3, 3, 1), data, refit=False)
    b = random_search("logreg", space, SearchConfig(3, 3, 1), data, refit=False)
    assert [c.params for c in a.candidates] == [c.params for c in b.candidates]
    assert a.best_mean == b.best_mean


def test_search_n_iter_bound(data):
    with pytest.raises(PreconditionError):
        random_search("logreg", default_space("logreg"), SearchConfig(n_iter=6), data)
    res = random_search("logreg", ParamSpace("logreg", {"C": [1.0]}),
                        SearchConfig(n_iter=3, sample_without_replacement=False), data, refit=False)
    assert len(res.candidates) == 3


def test_ledger_round_trip(tmp_path, data):
    space = ParamSpace("forest", {"n_estimators": [3, 5], "min_samples_leaf": [1, 4]})
    result = random_search("forest", space, SearchConfig(4, 3, 2), data, refit=False)
    path = tmp_path / "ledger.csv"
    write_ledger(result, path)
    rows = read_ledger(path)
    assert len(rows) == 4
    assert list(rows[0]) == ["candidate", "n_estimators", "min_samples_leaf", "fold0", "fold1", "fold2", "mean_accuracy"]
    assert max(float(r["mean_accuracy"]) for r in rows) == result.best_mean
    for r, c in zip(rows, result.candidates):
        assert [float(r[f"fold{i}"]) for i in range(3)] == c.fold_accuracies


def test_kfold_small_cases():
    labels = np.r_[np.zeros(6, int), np.ones(6, int)]
    folds = stratified_kfold(labels, 3, 0)
    for f in range(3):
        assert np.bincount(labels[folds == f], minlength=2).tolist() == [2, 2]
    labels = np.array([0, 0, 0, 1, 1, 1])
    folds = stratified_kfold(labels, 2, 0)
    assert np.bincount(folds).tolist() == [3, 3]
    assert sorted(np.bincount(labels[folds == 0], minlength=2).tolist()) == [1, 2]


def test_constant_predictor_scores_base_rate():
    labels = np.r_[np.zeros(60, int), np.ones(40, int)]
    data = FeatureMatrix(np.zeros((100, 1)), ("a",), labels)
    folds = stratified_kfold(labels, 5, 0)
    accs, mean = cross_val_accuracy("tree", {"max_depth": 0}, data, folds)
    assert accs == [0.6] * 5 and mean == pytest.approx(0.6)


def test_cv_mean_matches_pooled_accuracy(data):
    from idsfusion.models import fit_model, predict
    folds = stratified_kfold(data.labels, 4, 1)  # 160 rows -> equal folds of 40
    accs, mean = cross_val_accuracy("logreg", {"C": 1.0}, data, folds, 0)
    correct = 0
    for f in range(4):
        m = fit_model("logreg", data.values[folds != f], {"C": 1.0}, 0, y=data.labels[folds != f])
        correct += int(np.sum(predict(m, data.values[folds == f]) == data.labels[folds == f]))
    assert mean == pytest.approx(correct / len(data.labels), abs=1e-15)


def test_singleton_space(tmp_path, data):
    space = ParamSpace("forest", {"n_estimators": [4], "min_samples_leaf": [2]})
    result = random_search("forest", space, SearchConfig(1, 3, 0), data, refit=False)
    assert result.best_params == {"n_estimators": 4, "min_samples_leaf": 2}
    write_ledger(result, tmp_path / "l.csv")
    assert len(read_ledger(tmp_path / "l.csv")) == 1
