"""From-scratch binary classifiers: CART tree, random forest, boosted trees, logistic regression.

All predictors resolve exact ties (even forest vote, score of exactly 0.5) to
class 0.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DataError, PreconditionError
from .preprocess import FeatureMatrix, derive_seed

VARIANTS = ("tree", "forest", "gbm", "logreg")
MODEL_FORMAT = "idsfusion-model"
MODEL_VERSION = 1


class TrainingError(RuntimeError):
    """Optimisation diverged or produced non-finite values."""


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int | None = None
    min_samples_leaf: int = 1
    criterion: str = "gini"


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 200
    min_samples_leaf: int = 4
    bootstrap: bool = True
    # None -> ceil(sqrt(n_features))
    features_per_split: int | None = None
    max_depth: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class GbmConfig:
    n_estimators: int = 200
    max_depth: int = 3
    learning_rate: float = 0.1
    l2_leaf_regularization: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class LogRegConfig:
    C: float = 100.0
    penalty: str = "l2"
    max_iterations: int = 500
    tolerance: float = 1e-6
    step_size: float = 0.1


CONFIG_TYPES = {
    "tree": TreeConfig,
    "forest": ForestConfig,
    "gbm": GbmConfig,
    "logreg": LogRegConfig,
}


def make_config(variant: str, params: dict | None = None, seed: int | None = None):
    """Build the config for ``variant`` from a parameter dict, rejecting unknown keys."""
    try:
        cls = CONFIG_TYPES[variant]
    except KeyError:
        raise PreconditionError(f"unknown model variant {variant!r}") from None
    params = dict(params or {})
    known = set(cls.__dataclass_fields__)
    unknown = set(params) - known
    if unknown:
        raise PreconditionError(f"{variant} has no hyperparameter(s) {sorted(unknown)}")
    if seed is not None and "seed" in known and "seed" not in params:
        params["seed"] = seed
    cfg = cls(**params)
    _validate(variant, cfg)
    return cfg


def _validate(variant, cfg):
    if variant in ("tree", "forest", "gbm"):
        depth = cfg.max_depth
        if depth is not None and depth < 0:
            raise PreconditionError("max_depth must be nonnegative")
    if variant in ("tree", "forest") and cfg.min_samples_leaf < 1:
        raise PreconditionError("min_samples_leaf must be positive")
    if variant in ("forest", "gbm") and cfg.n_estimators < 1:
        raise PreconditionError("n_estimators must be positive")
    if variant == "gbm":
        if not 0.0 < cfg.learning_rate <= 1.0:
            raise PreconditionError("learning_rate must lie in (0, 1]")
        if cfg.l2_leaf_regularization < 0:
            raise PreconditionError("l2_leaf_regularization must be nonnegative")
    if variant == "logreg":
        if cfg.penalty.lower() != "l2":
            raise PreconditionError("only the L2 penalty is supported")
        if cfg.C <= 0 or cfg.step_size <= 0 or cfg.tolerance <= 0 or cfg.max_iterations < 1:
            raise PreconditionError("C, step_size, tolerance and max_iterations must be positive")


# ---------------------------------------------------------------------------
# Tree structure
# ---------------------------------------------------------------------------

@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf. Rows with ``x <= threshold`` go left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        return kernels.tree_apply(X, self.feature, self.threshold, self.left, self.right)

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def depths(self) -> np.ndarray:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return depth

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        ints = ("feature", "left", "right", "n_samples")
        return cls(**{
            k: np.asarray(d[k], dtype=np.int64 if k in ints else np.float64)
            for k in ("feature", "threshold", "left", "right", "value", "n_samples")
        })


class _TreeBuilder:
    """Depth-first greedy growth shared by the classification and boosting trees."""

    def __init__(self):
        self.feature, self.threshold = [], []
        self.left, self.right = [], []
        self.value, self.n_samples = [], []

    def _new(self, n):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.n_samples.append(n)
        return len(self.feature) - 1

    def grow(self, X, idx, max_depth, find_split, leaf_value):
        stack = [(idx, 0, self._new(len(idx)))]
        while stack:
            node_idx, depth, node = stack.pop()
            self.value[node] = leaf_value(node_idx)
            if max_depth is not None and depth >= max_depth:
                continue
            f, thr = find_split(node_idx)
            if f < 0:
                continue
            go_left = X[node_idx, f] <= thr
            li, ri = node_idx[go_left], node_idx[~go_left]
            left, right = self._new(len(li)), self._new(len(ri))
            self.feature[node], self.threshold[node] = f, thr
            self.left[node], self.right[node] = left, right
            stack.append((ri, depth + 1, right))
            stack.append((li, depth + 1, left))
        return Tree(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=np.float64),
            np.asarray(self.n_samples, dtype=np.int64),
        )


def _grow_classification_tree(X, y, idx, max_depth, min_leaf, n_candidates=None, rng=None):
    n_features = X.shape[1]
    all_features = np.arange(n_features, dtype=np.int64)

    def leaf_value(node_idx):
        return float(np.count_nonzero(y[node_idx])) / len(node_idx)

    def find_split(node_idx):
        positives = np.count_nonzero(y[node_idx])
        if positives == 0 or positives == len(node_idx):
            return -1, 0.0
        if n_candidates is None or n_candidates >= n_features:
            features = all_features
        else:
            features = np.sort(rng.choice(n_features, n_candidates, replace=False)).astype(np.int64)
        f, thr, _ = kernels.gini_split(X, y, node_idx, features, min_leaf)
        return int(f), float(thr)

    return _TreeBuilder().grow(X, idx, max_depth, find_split, leaf_value)


def _grow_boosting_tree(X, g, h, max_depth, lam):
    features = np.arange(X.shape[1], dtype=np.int64)

    def sums(node_idx):
        return np.cumsum(g[node_idx])[-1], np.cumsum(h[node_idx])[-1]

    def leaf_value(node_idx):
        G, H = sums(node_idx)
        if not H + lam > 0.0:
            return 0.0
        return float(-G / (H + lam))

    def find_split(node_idx):
        G, H = sums(node_idx)
        f, thr, _ = kernels.newton_split(X, g, h, node_idx, features, lam, 1, G, H)
        return int(f), float(thr)

    idx = np.arange(X.shape[0], dtype=np.int64)
    return _TreeBuilder().grow(X, idx, max_depth, find_split, leaf_value)


# ---------------------------------------------------------------------------
# Trained model
# ---------------------------------------------------------------------------

@dataclass
class TrainedModel:
    variant: str
    config: object
    n_features: int
    trees: list = field(default_factory=list)
    base_score: float = 0.0
    weights: np.ndarray | None = None
    bias: float = 0.0
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "variant": self.variant,
            "config": asdict(self.config),
            "n_features": self.n_features,
        }
        if self.variant in ("tree", "forest", "gbm"):
            out["trees"] = [t.to_dict() for t in self.trees]
        if self.variant == "gbm":
            out["base_score"] = self.base_score
            out["train_logloss"] = list(self.history)
        if self.variant == "logreg":
            out["weights"] = self.weights.tolist()
            out["bias"] = self.bias
            out["standardization"] = {"mean": self.mean.tolist(), "scale": self.scale.tolist()}
            out["iterations"] = len(self.history)
            out["train_loss"] = list(self.history)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise DataError("unsupported model file format or version")
        variant = d["variant"]
        model = cls(variant, CONFIG_TYPES[variant](**d["config"]), int(d["n_features"]))
        model.trees = [Tree.from_dict(t) for t in d.get("trees", [])]
        if variant == "gbm":
            model.base_score = float(d["base_score"])
            model.history = list(d.get("train_logloss", []))
        if variant == "logreg":
            model.weights = np.asarray(d["weights"], dtype=np.float64)
            model.bias = float(d["bias"])
            model.mean = np.asarray(d["standardization"]["mean"], dtype=np.float64)
            model.scale = np.asarray(d["standardization"]["scale"], dtype=np.float64)
            model.history = list(d.get("train_loss", []))
        return model


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    return TrainedModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _xy(data, y=None):
    if isinstance(data, FeatureMatrix):
        X, y = data.values, data.labels
    else:
        X = data
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DataError(f"bad training shapes X{X.shape} y{y.shape}")
    if X.shape[0] == 0:
        raise PreconditionError("empty training set")
    return X, y


def _as_array(X) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        X = X.values
    return np.ascontiguousarray(X, dtype=np.float64)


def fit_tree(data, cfg: TreeConfig = TreeConfig(), y=None) -> TrainedModel:
    X, y = _xy(data, y)
    if cfg.criterion != "gini":
        raise PreconditionError("only the gini criterion is supported")
    idx = np.arange(X.shape[0], dtype=np.int64)
    tree = _grow_classification_tree(X, y, idx, cfg.max_depth, cfg.min_samples_leaf)
    return TrainedModel("tree", cfg, X.shape[1], trees=[tree])


def _features_per_split(cfg: ForestConfig, n_features: int) -> int:
    m = cfg.features_per_split
    if m is None:
        m = math.ceil(math.sqrt(n_features))
    if not 1 <= m <= n_features:
        raise PreconditionError(f"features_per_split={m} outside [1, {n_features}]")
    return m


def fit_forest(data, cfg: ForestConfig = ForestConfig(), y=None, n_jobs: int = 1) -> TrainedModel:
    """Bagged CART trees; tree ``t`` draws from its own stream keyed by ``(seed, t)``."""
    X, y = _xy(data, y)
    n, d = X.shape
    m = _features_per_split(cfg, d)

    def grow(t):
        rng = np.random.default_rng(derive_seed(cfg.seed, t))
        if cfg.bootstrap:
            idx = np.sort(rng.integers(0, n, n)).astype(np.int64)
        else:
            idx = np.arange(n, dtype=np.int64)
        return _grow_classification_tree(X, y, idx, cfg.max_depth, cfg.min_samples_leaf, m, rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(grow, range(cfg.n_estimators)))
    else:
        trees = [grow(t) for t in range(cfg.n_estimators)]
    return TrainedModel("forest", cfg, d, trees=trees)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss_from_scores(y, raw) -> float:
    """Mean binary log-loss of raw log-odds scores."""
    raw = np.asarray(raw, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def fit_gbm(data, cfg: GbmConfig = GbmConfig(), y=None) -> TrainedModel:
    """Second-order gradient boosting of depth-limited regression trees on log-loss."""
    X, y = _xy(data, y)
    p = float(np.mean(y))
    if p <= 0.0 or p >= 1.0:
        raise PreconditionError("boosting needs both classes in the training labels")
    base = math.log(p / (1.0 - p))
    raw = np.full(X.shape[0], base)
    lam = cfg.l2_leaf_regularization
    trees, history = [], [log_loss_from_scores(y, raw)]
    for _ in range(cfg.n_estimators):
        prob = sigmoid(raw)
        g = prob - y
        h = prob * (1.0 - prob)
        tree = _grow_boosting_tree(X, g, h, cfg.max_depth, lam)
        raw = raw + cfg.learning_rate * tree.leaf_values(X)
        trees.append(tree)
        history.append(log_loss_from_scores(y, raw))
    return TrainedModel("gbm", cfg, X.shape[1], trees=trees, base_score=base, history=history)


def logreg_objective(w, b, Z, y, C):
    """Loss and gradient of mean log-loss + ||w||^2 / (2 C n) (bias unpenalised)."""
    n = Z.shape[0]
    z = Z @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + (w @ w) / (2.0 * C * n))
    r = sigmoid(z) - y
    grad_w = Z.T @ r / n + w / (C * n)
    grad_b = float(np.mean(r))
    return loss, grad_w, grad_b


def standardize(X):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    active = std > 0
    scale = np.where(active, std, 1.0)
    Z = (X - mean) / scale
    Z[:, ~active] = 0.0
    return Z, mean, scale, active


def fit_logreg(data, cfg: LogRegConfig = LogRegConfig(), y=None) -> TrainedModel:
    """Full-batch gradient descent on standardised features.

    Constant features get scale 1 and stay at weight 0.
    """
    X, y = _xy(data, y)
    _validate("logreg", cfg)
    Z, mean, scale, active = standardize(X)
    w = np.zeros(X.shape[1])
    b = 0.0
    history = []
    for _ in range(cfg.max_iterations):
        loss, gw, gb = logreg_objective(w, b, Z, y, cfg.C)
        if not math.isfinite(loss):
            raise TrainingError(
                f"non-finite loss during gradient descent; try a smaller step_size than {cfg.step_size}"
            )
        history.append(loss)
        gw[~active] = 0.0
        if max(float(np.max(np.abs(gw), initial=0.0)), abs(gb)) < cfg.tolerance:
            break
        w = w - cfg.step_size * gw
        b = b - cfg.step_size * gb
    return TrainedModel(
        "logreg", cfg, X.shape[1], weights=w, bias=b, mean=mean, scale=scale, history=history
    )


def fit_model(variant: str, data, params: dict | None = None, seed: int | None = None, y=None):
    cfg = make_config(variant, params, seed)
    return {
        "tree": fit_tree,
        "forest": fit_forest,
        "gbm": fit_gbm,
        "logreg": fit_logreg,
    }[variant](data, cfg, y)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def raw_scores(model: TrainedModel, X) -> np.ndarray:
    """Boosting log-odds, before the sigmoid."""
    X = _check_X(model, X)
    raw = np.full(X.shape[0], model.base_score)
    lr = model.config.learning_rate
    for tree in model.trees:
        raw = raw + lr * tree.leaf_values(X)
    return raw


def _check_X(model, X):
    X = _as_array(X)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(
            f"model expects {model.n_features} features, got shape {X.shape}"
        )
    return X


def predict_scores(model: TrainedModel, X) -> np.ndarray:
    """Per-row score in [0, 1]; ``predict`` is ``scores > 0.5``."""
    X = _check_X(model, X)
    if model.variant == "tree":
        return model.trees[0].leaf_values(X)
    if model.variant == "forest":
        votes = np.zeros(X.shape[0])
        for tree in model.trees:
            votes += tree.leaf_values(X) > 0.5
        return votes / len(model.trees)
    if model.variant == "gbm":
        return sigmoid(raw_scores(model, X))
    Z = (X - model.mean) / model.scale
    return sigmoid(Z @ model.weights + model.bias)


def predict(model: TrainedModel, X) -> np.ndarray:
    return (predict_scores(model, X) > 0.5).astype(np.int64)
