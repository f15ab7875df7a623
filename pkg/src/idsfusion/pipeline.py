"""End-to-end stages behind the CLI: preprocess, tune, train, evaluate.

Each stage reads and writes files under ``config.out_dir`` only, so stages can
run separately or chained and produce identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import evaluation, ingest, models, preprocess, svg, tuning
from .errors import ConfigError, PreconditionError

logger = logging.getLogger(__name__)

MODEL_NAMES = ("gbm", "logreg", "forest")
DISPLAY_NAMES = {"gbm": "XGBoost-style GBM", "logreg": "Logistic Regression", "forest": "Random Forest"}


@dataclass
class PipelineConfig:
    unsw_csv: str | None = None
    kdd_csv: str | None = None
    unsw_has_header: bool = False
    kdd_has_header: bool = False
    unsw_schema: str | None = None
    kdd_schema: str | None = None
    sample_per_dataset: int | None = None
    train_fraction: float = 0.10
    smote_k: int = 5
    smote_scope: str = "train"
    models: list = field(default_factory=lambda: list(MODEL_NAMES))
    # per-model hyperparameters applied on top of the fixed optima or search result
    model_params: dict = field(default_factory=dict)
    fixed_params: bool = False
    n_iter: int = 10
    folds: int = 3
    sample_without_replacement: bool = True
    curve_fractions: list = field(default_factory=lambda: list(evaluation.DEFAULT_FRACTIONS))
    out_dir: str = "idsfusion-out"
    seed: int = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.smote_scope not in preprocess.SMOTE_SCOPES:
            raise ConfigError(f"smote_scope must be one of {preprocess.SMOTE_SCOPES}")
        if self.smote_k < 1:
            raise ConfigError("smote_k must be positive")
        bad = [m for m in self.models if m not in MODEL_NAMES]
        if bad:
            raise ConfigError(f"unknown models {bad}; choose from {list(MODEL_NAMES)}")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("models must not repeat")
        if set(self.model_params) - set(MODEL_NAMES):
            raise ConfigError("model_params keys must be model names")
        for name, params in self.model_params.items():
            try:
                models.make_config(name, params)
            except PreconditionError as exc:
                raise ConfigError(str(exc)) from None
        if self.folds < 2 or self.n_iter < 1:
            raise ConfigError("folds must be >= 2 and n_iter >= 1")
        fr = [float(f) for f in self.curve_fractions]
        if fr != sorted(fr) or any(not 0 < f < 1 for f in fr):
            raise ConfigError("curve_fractions must be ascending values in (0, 1)")
        if self.sample_per_dataset is not None and self.sample_per_dataset < 2:
            raise ConfigError("sample_per_dataset must be at least 2")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


class Layout:
    """Paths of every artifact in an output directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.cache = self.root / "cache"
        self.tuning = self.root / "tuning"
        self.models = self.root / "models"
        self.charts = self.root / "charts"
        self.unsw_selected = self.cache / "unsw_selected.csv"
        self.kdd_selected = self.cache / "kdd_selected.csv"
        self.train = self.cache / "train.csv"
        self.test = self.cache / "test.csv"
        self.sources = self.cache / "fusion_sources.csv"
        self.class_counts = self.root / "class_counts.json"
        self.best_params = self.tuning / "best_params.json"
        self.metrics_csv = self.root / "metrics.csv"
        self.metrics_txt = self.root / "metrics.txt"
        self.curve_csv = self.root / "curve.csv"
        self.report = self.root / "report.json"
        self.summary = self.root / "summary.txt"
        self.timings = self.root / "timings.json"
        self.lock = self.root / ".lock"

    def ledger(self, name: str) -> Path:
        return self.tuning / f"{name}_ledger.csv"

    def model(self, name: str) -> Path:
        return self.models / f"{name}.json"

    def chart(self, name: str) -> Path:
        return self.charts / f"{name}.svg"


def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@contextmanager
def run_lock(layout: Layout):
    layout.root.mkdir(parents=True, exist_ok=True)
    try:
        fd = os.open(layout.lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise PreconditionError(
            f"{layout.lock} exists: another run is using {layout.root} (delete the file if stale)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        layout.lock.unlink(missing_ok=True)


def plan(cfg: PipelineConfig) -> str:
    """Human-readable description of what ``run`` would do."""
    lines = ["resolved configuration:"]
    lines += [f"  {k} = {json.dumps(v)}" for k, v in cfg.to_dict().items()]
    lines += [
        "stages:",
        f"  preprocess: load {cfg.unsw_csv} and {cfg.kdd_csv}, encode, select 48 mapped features, "
        f"split at {cfg.train_fraction}, SMOTE(k={cfg.smote_k}, scope={cfg.smote_scope}), fuse",
        "  tune: " + ("fixed optima" if cfg.fixed_params
                      else f"randomized search n_iter={cfg.n_iter}, folds={cfg.folds}")
        + f" for {', '.join(cfg.models) or '(no models)'}",
        "  train: fit each model on the fused training matrix",
        f"  evaluate: metrics table + learning curve over {cfg.curve_fractions}",
        f"outputs: {cfg.out_dir}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------

def _schema(kind: str, override: str | None):
    return ingest.load_schema(override) if override else ingest.builtin_schema(kind)


def _preprocess_key(cfg: PipelineConfig, checksums: dict) -> str:
    relevant = {k: getattr(cfg, k) for k in (
        "unsw_has_header", "kdd_has_header", "sample_per_dataset", "train_fraction",
        "smote_k", "smote_scope", "seed")}
    for name in ("unsw_schema", "kdd_schema"):
        path = getattr(cfg, name)
        relevant[name] = preprocess.file_checksum(path) if path else None
    blob = json.dumps({"inputs": checksums, "params": relevant}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def cmd_preprocess(cfg: PipelineConfig) -> dict:
    """Build the fused train/test caches and the class-distribution summary."""
    layout = Layout(cfg.out_dir)
    paths = {"UNSW": cfg.unsw_csv, "KDD": cfg.kdd_csv}
    for kind, path in paths.items():
        if not path:
            raise ConfigError(f"no {kind} CSV path configured")
        if not Path(path).is_file():
            raise FileNotFoundError(f"{kind} dataset file {path} not found")
    checksums = {k: preprocess.file_checksum(p) for k, p in paths.items()}
    key = _preprocess_key(cfg, checksums)
    cached = [layout.unsw_selected, layout.kdd_selected, layout.train, layout.test]
    if all(preprocess.read_cache_checksum(p) == key for p in cached) and layout.class_counts.is_file():
        logger.info("preprocess: caches up to date")
        return json.loads(layout.class_counts.read_text(encoding="utf-8"))

    selected, summary = {}, {}
    for key_idx, (kind, path) in enumerate(paths.items()):
        schema = _schema(kind, getattr(cfg, f"{kind.lower()}_schema"))
        table = ingest.load_csv(path, schema, getattr(cfg, f"{kind.lower()}_has_header"))
        labels = ingest.extract_labels(table)
        parsed = ingest.class_counts(labels)
        if cfg.sample_per_dataset:
            table, labels = preprocess.subsample(
                table, labels, cfg.sample_per_dataset, preprocess.derive_seed(cfg.seed, 100 + key_idx))
        matrix = preprocess.encode(table)
        selected[kind] = preprocess.select_features(matrix, kind)
        summary[kind] = {"parsed": list(parsed),
                         "sampled": list(ingest.class_counts(labels))}
        logger.info("%s: %d rows parsed %s, %d used", kind, sum(parsed), parsed, len(labels))

    data = preprocess.prepare(
        selected["UNSW"], selected["KDD"], cfg.train_fraction,
        preprocess.SmoteConfig(cfg.smote_k, preprocess.derive_seed(cfg.seed, 200)),
        cfg.smote_scope, preprocess.derive_seed(cfg.seed, 300),
    )
    for kind in paths:
        summary[kind]["smote_scope"] = cfg.smote_scope
        summary[kind]["before_smote"] = data.class_counts[kind]["before"]
        summary[kind]["after_smote"] = data.class_counts[kind]["after"]
    summary["fused"] = {
        "train": list(ingest.class_counts(data.train.labels)),
        "test": list(ingest.class_counts(data.test.labels)),
        "n_features": data.train.n_features,
    }

    layout.cache.mkdir(parents=True, exist_ok=True)
    preprocess.save_matrix(selected["UNSW"], layout.unsw_selected, key)
    preprocess.save_matrix(selected["KDD"], layout.kdd_selected, key)
    preprocess.save_matrix(data.train, layout.train, key)
    preprocess.save_matrix(data.test, layout.test, key)
    with open(layout.sources, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,fused_name,unsw_name,kdd_name\n")
        for i, (u, k) in enumerate(data.train.sources):
            fh.write(f"{i},{data.train.feature_names[i]},{u},{k}\n")
    _dump_json(summary, layout.class_counts)
    groups = {}
    for kind in paths:
        groups[f"{kind} before"] = tuple(summary[kind]["before_smote"])
        groups[f"{kind} after"] = tuple(summary[kind]["after_smote"])
    layout.charts.mkdir(parents=True, exist_ok=True)
    layout.chart("class_distribution").write_text(
        svg.bar_chart(f"Class distribution before/after SMOTE ({cfg.smote_scope} scope)", groups),
        encoding="utf-8")
    return summary


# ---------------------------------------------------------------------------
# tune / train
# ---------------------------------------------------------------------------

def _require(path: Path, stage: str) -> None:
    if not path.is_file():
        raise PreconditionError(f"{path} is missing; run `idsfusion {stage}` first")


def cmd_tune(cfg: PipelineConfig) -> dict:
    """Search hyperparameters per model (or record the fixed optima)."""
    layout = Layout(cfg.out_dir)
    if not layout.train.is_file():
        cmd_preprocess(cfg)
    layout.tuning.mkdir(parents=True, exist_ok=True)
    best = {}
    train = None
    for name in cfg.models:
        override = cfg.model_params.get(name, {})
        if cfg.fixed_params:
            params = {**tuning.REPORTED_OPTIMA[name], **override}
            best[name] = {"params": params, "source": "fixed", "cv_mean_accuracy": None}
            continue
        if train is None:
            train = preprocess.load_matrix(layout.train)
        space = tuning.default_space(name)
        n_iter = cfg.n_iter
        if cfg.sample_without_replacement and n_iter > space.size():
            logger.warning("%s: n_iter %d exceeds space size %d, evaluating all", name, n_iter, space.size())
            n_iter = space.size()
        search_cfg = tuning.SearchConfig(n_iter, cfg.folds, preprocess.derive_seed(cfg.seed, 400),
                                         cfg.sample_without_replacement)
        result = tuning.random_search(name, space, search_cfg, train, refit=False)
        tuning.write_ledger(result, layout.ledger(name))
        best[name] = {"params": {**result.best_params, **override}, "source": "search",
                      "cv_mean_accuracy": result.best_mean}
        logger.info("%s: best %s (cv accuracy %.4f)", name, result.best_params, result.best_mean)
    _dump_json(best, layout.best_params)
    return best


def _model_seed(cfg: PipelineConfig) -> int:
    return preprocess.derive_seed(cfg.seed, 500)


def _load_best(cfg: PipelineConfig) -> dict:
    layout = Layout(cfg.out_dir)
    _require(layout.best_params, "tune")
    best = json.loads(layout.best_params.read_text(encoding="utf-8"))
    missing = [m for m in cfg.models if m not in best]
    if missing:
        raise PreconditionError(f"no tuned parameters for {missing}; run `idsfusion tune` first")
    return best


def cmd_train(cfg: PipelineConfig) -> dict:
    layout = Layout(cfg.out_dir)
    _require(layout.train, "preprocess")
    best = _load_best(cfg)
    train = preprocess.load_matrix(layout.train)
    layout.models.mkdir(parents=True, exist_ok=True)
    fitted = {}
    for name in cfg.models:
        model = models.fit_model(name, train, best[name]["params"], _model_seed(cfg))
        models.save_model(model, layout.model(name))
        fitted[name] = model
    return fitted


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def cmd_evaluate(cfg: PipelineConfig) -> dict:
    """Metrics table, learning curve, charts and the run report."""
    layout = Layout(cfg.out_dir)
    if not cfg.models:
        layout.root.mkdir(parents=True, exist_ok=True)
        evaluation.write_metrics_csv({}, layout.metrics_csv)
        raise PreconditionError("no models selected; nothing to evaluate")
    _require(layout.test, "preprocess")
    for name in cfg.models:
        _require(layout.model(name), "train")
    best = _load_best(cfg)
    test = preprocess.load_matrix(layout.test)
    table = {}
    for name in cfg.models:
        model = models.load_model(layout.model(name))
        table[name] = evaluation.score(model, test)
    evaluation.write_metrics_csv(table, layout.metrics_csv)
    layout.metrics_txt.write_text(evaluation.format_metrics_table(table), encoding="utf-8")

    unsw = preprocess.load_matrix(layout.unsw_selected)
    kdd = preprocess.load_matrix(layout.kdd_selected)
    points = evaluation.learning_curve(
        {name: (name, best[name]["params"]) for name in cfg.models},
        cfg.curve_fractions, unsw, kdd,
        preprocess.SmoteConfig(cfg.smote_k, preprocess.derive_seed(cfg.seed, 200)),
        cfg.smote_scope, preprocess.derive_seed(cfg.seed, 300), _model_seed(cfg),
    )
    evaluation.write_curve_csv(points, layout.curve_csv)
    layout.charts.mkdir(parents=True, exist_ok=True)
    for metric in evaluation.METRIC_NAMES:
        series = {
            name: [(p.train_fraction, getattr(p.report, metric)) for p in points if p.model == name]
            for name in cfg.models
        }
        layout.chart(f"curve_{metric}").write_text(
            svg.line_chart(f"{metric} vs training fraction", series, "training fraction", metric),
            encoding="utf-8")

    report = {
        # out_dir is a location, not a parameter; omitting it keeps reports comparable across dirs
        "config": {k: v for k, v in cfg.to_dict().items() if k != "out_dir"},
        "datasets": json.loads(layout.class_counts.read_text(encoding="utf-8"))
        if layout.class_counts.is_file() else None,
        "tuning": best,
        "metrics": {n: {**dict(zip(evaluation.METRIC_NAMES, r.as_row())), "degenerate": list(r.degenerate)}
                    for n, r in table.items()},
        "learning_curve": [
            {"fraction": p.train_fraction, "model": p.model,
             **dict(zip(evaluation.METRIC_NAMES, p.report.as_row()))}
            for p in points
        ],
        "test_rows": test.n_samples,
    }
    _dump_json(report, layout.report)
    layout.summary.write_text(_summary_text(cfg, report, table), encoding="utf-8")
    return report


def _summary_text(cfg, report, table) -> str:
    lines = [f"train_fraction: {cfg.train_fraction}", f"seed: {cfg.seed}",
             f"smote: k={cfg.smote_k}, scope={cfg.smote_scope}", ""]
    if report["datasets"]:
        for kind in ("UNSW", "KDD"):
            d = report["datasets"][kind]
            lines.append(f"{kind}: used {sum(d['sampled'])} rows (benign/malicious {d['sampled'][0]}/"
                         f"{d['sampled'][1]}); SMOTE {d['before_smote']} -> {d['after_smote']}")
        lines.append("")
    for name in cfg.models:
        t = report["tuning"][name]
        lines.append(f"{name} params ({t['source']}): {json.dumps(t['params'], sort_keys=True)}")
    lines += ["", evaluation.format_metrics_table({DISPLAY_NAMES[n]: r for n, r in table.items()})]
    return "\n".join(lines)


def cmd_run(cfg: PipelineConfig) -> dict:
    """preprocess -> tune -> train -> evaluate; wall-clock timings go to ``timings.json``."""
    layout = Layout(cfg.out_dir)
    timings = {}
    with run_lock(layout):
        for name, stage in (("preprocess", cmd_preprocess), ("tune", cmd_tune),
                            ("train", cmd_train), ("evaluate", cmd_evaluate)):
            start = time.perf_counter()
            result = stage(cfg)
            timings[name] = round(time.perf_counter() - start, 3)
            logger.info("%s done in %.1fs", name, timings[name])
        _dump_json(timings, layout.timings)
    return result


def recompute_metrics(out_dir: str | Path, names) -> dict:
    """Metrics from the serialized models and cached test matrix alone."""
    layout = Layout(out_dir)
    test = preprocess.load_matrix(layout.test)
    return {n: evaluation.score(models.load_model(layout.model(n)), test) for n in names}

