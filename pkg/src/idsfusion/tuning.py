"""Randomized hyperparameter search over stratified k-fold cross-validation."""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, PreconditionError
from .models import CONFIG_TYPES, TrainedModel, TrainingError, fit_model, predict
from .preprocess import FeatureMatrix, derive_seed

# Small spaces bracketing the reported optima.
DEFAULT_SPACES = {
    "gbm": {
        "n_estimators": [50, 100, 200],
        "max_depth": [3, 5, 7],
        "learning_rate": [0.01, 0.1, 0.3],
    },
    "logreg": {
        "C": [0.01, 0.1, 1.0, 10.0, 100.0],
        "penalty": ["l2"],
    },
    "forest": {
        "n_estimators": [50, 100, 200],
        "min_samples_leaf": [1, 2, 4],
    },
}

REPORTED_OPTIMA = {
    "gbm": {"n_estimators": 200, "max_depth": 3, "learning_rate": 0.1},
    "logreg": {"penalty": "l2", "C": 100.0},
    "forest": {"n_estimators": 200, "min_samples_leaf": 4},
}


@dataclass(frozen=True)
class ParamSpace:
    variant: str
    values: dict

    def __post_init__(self):
        if not self.values or any(len(v) == 0 for v in self.values.values()):
            raise PreconditionError("parameter space must be nonempty")
        fields = CONFIG_TYPES[self.variant].__dataclass_fields__
        unknown = set(self.values) - set(fields)
        if unknown:
            raise PreconditionError(f"{self.variant} has no hyperparameter(s) {sorted(unknown)}")

    @property
    def names(self) -> list[str]:
        return list(self.values)

    def size(self) -> int:
        return int(np.prod([len(v) for v in self.values.values()]))

    def assignments(self) -> list[dict]:
        """Cartesian product in declaration order."""
        names = self.names
        return [dict(zip(names, combo)) for combo in itertools.product(*self.values.values())]

    def __contains__(self, params: dict) -> bool:
        return set(params) == set(self.values) and all(
            params[k] in self.values[k] for k in self.values
        )


def default_space(variant: str) -> ParamSpace:
    return ParamSpace(variant, {k: list(v) for k, v in DEFAULT_SPACES[variant].items()})


@dataclass(frozen=True)
class SearchConfig:
    n_iter: int = 10
    folds: int = 3
    seed: int = 0
    sample_without_replacement: bool = True


@dataclass
class Candidate:
    params: dict
    fold_accuracies: list
    mean_accuracy: float


@dataclass
class SearchResult:
    variant: str
    candidates: list
    best_params: dict
    best_mean: float
    model: TrainedModel | None = field(default=None, repr=False)


def stratified_kfold(labels, k: int, seed: int = 0) -> np.ndarray:
    """Fold id per sample; each class is dealt round-robin over a seeded permutation."""
    labels = np.asarray(labels)
    if k < 2:
        raise PreconditionError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for c in (0, 1):
        members = np.flatnonzero(labels == c)
        if len(members) < k:
            raise PreconditionError(f"class {c} has {len(members)} samples, fewer than {k} folds")
        order = rng.permutation(members)
        # continue the deal where the previous class stopped so fold sizes stay even
        folds[order] = (offset + np.arange(len(order))) % k
        offset = (offset + len(order)) % k
    return folds


def cross_val_accuracy(variant: str, params: dict, data: FeatureMatrix, folds, seed: int = 0):
    """Per-fold accuracies (train on the other folds) and their mean."""
    folds = np.asarray(folds)
    accs = []
    for f in range(int(folds.max()) + 1):
        test = folds == f
        try:
            model = fit_model(variant, data.values[~test], params, seed, y=data.labels[~test])
            pred = predict(model, data.values[test])
        except (PreconditionError, DataError, TrainingError) as exc:
            raise type(exc)(f"fold {f}: {exc}") from exc
        accs.append(float(np.mean(pred == data.labels[test])))
    return accs, float(np.mean(accs))


def random_search(variant: str, space: ParamSpace, cfg: SearchConfig, data: FeatureMatrix,
                  refit: bool = True) -> SearchResult:
    """Sample ``n_iter`` assignments, score each by CV accuracy, refit the best on all data.

    Ties go to the earliest sampled candidate.
    """
    grid = space.assignments()
    rng = np.random.default_rng(derive_seed(cfg.seed, 1))
    if cfg.sample_without_replacement:
        if cfg.n_iter > len(grid):
            raise PreconditionError(
                f"n_iter={cfg.n_iter} exceeds the {len(grid)} assignments of the {variant} space"
            )
        picks = rng.choice(len(grid), size=cfg.n_iter, replace=False)
    else:
        picks = rng.integers(0, len(grid), cfg.n_iter)
    folds = stratified_kfold(data.labels, cfg.folds, derive_seed(cfg.seed, 2))
    candidates = []
    for i in picks:
        params = grid[int(i)]
        accs, mean = cross_val_accuracy(variant, params, data, folds, cfg.seed)
        candidates.append(Candidate(params, accs, mean))
    best = max(range(len(candidates)), key=lambda j: (candidates[j].mean_accuracy, -j))
    result = SearchResult(variant, candidates, candidates[best].params, candidates[best].mean_accuracy)
    if refit:
        result.model = fit_model(variant, data, result.best_params, cfg.seed)
    return result


def write_ledger(result: SearchResult, path: str | Path) -> None:
    """One CSV row per candidate in sampling order."""
    n_folds = max((len(c.fold_accuracies) for c in result.candidates), default=0)
    names = list(result.candidates[0].params) if result.candidates else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["candidate", *names, *[f"fold{i}" for i in range(n_folds)], "mean_accuracy"])
        for i, c in enumerate(result.candidates):
            writer.writerow([i, *[json.dumps(c.params[n]) for n in names],
                             *[repr(a) for a in c.fold_accuracies], repr(c.mean_accuracy)])


def read_ledger(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
