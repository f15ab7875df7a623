"""Confusion matrices, accuracy/precision/recall/F1 and the training-size sweep."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, PreconditionError
from .models import fit_model, predict
from .preprocess import FeatureMatrix, SmoteConfig, prepare

DEFAULT_FRACTIONS = (0.02, 0.04, 0.06, 0.08, 0.10)
METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with malicious (label 1) as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    # names of metrics whose denominator was zero (reported as 0.0)
    degenerate: tuple[str, ...] = ()

    def as_row(self) -> list[float]:
        return [self.accuracy, self.precision, self.recall, self.f1]


def confusion(y_true, y_pred) -> ConfusionMatrix:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise DataError(f"length mismatch: {y_true.shape[0]} labels vs {y_pred.shape[0]} predictions")
    if y_true.size == 0:
        raise DataError("confusion matrix of an empty prediction set")
    t = y_true == 1
    p = y_pred == 1
    return ConfusionMatrix(
        tp=int(np.count_nonzero(t & p)),
        fp=int(np.count_nonzero(~t & p)),
        fn=int(np.count_nonzero(t & ~p)),
        tn=int(np.count_nonzero(~t & ~p)),
    )


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total == 0:
        raise DataError("metrics of an empty confusion matrix")
    degenerate = []
    accuracy = (cm.tp + cm.tn) / cm.total
    if cm.tp + cm.fp:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision = 0.0
        degenerate.append("precision")
    if cm.tp + cm.fn:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall = 0.0
        degenerate.append("recall")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        degenerate.append("f1")
    return MetricsReport(accuracy, precision, recall, f1, tuple(degenerate))


def score(model, data: FeatureMatrix) -> MetricsReport:
    return metrics(confusion(data.labels, predict(model, data)))


@dataclass(frozen=True)
class LearningCurvePoint:
    train_fraction: float
    model: str
    report: MetricsReport


def learning_curve(models: dict, fractions, unsw: FeatureMatrix, kdd: FeatureMatrix,
                   smote_cfg: SmoteConfig = SmoteConfig(), scope: str = "train",
                   seed: int = 0, model_seed: int | None = None) -> list[LearningCurvePoint]:
    """Metrics per (fraction, model) on the complement test set of each split.

    ``models`` maps a display name to ``(variant, params)``; ``unsw`` and ``kdd``
    are the feature-selected matrices before splitting. ``seed`` drives the
    splits, ``model_seed`` (default ``seed``) the model fits.
    """
    if model_seed is None:
        model_seed = seed
    fractions = [float(f) for f in fractions]
    if any(not 0 < f < 1 for f in fractions) or fractions != sorted(fractions):
        raise PreconditionError("fractions must lie in (0, 1) and be sorted ascending")
    points = []
    for fraction in fractions:
        data = prepare(unsw, kdd, fraction, smote_cfg, scope, seed)
        if len(np.unique(data.train.labels)) < 2:
            raise PreconditionError(f"fraction {fraction} gives a single-class training set")
        for name, (variant, params) in models.items():
            model = fit_model(variant, data.train, params, model_seed)
            points.append(LearningCurvePoint(fraction, name, score(model, data.test)))
    return points


def write_metrics_csv(rows: dict, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", *METRIC_NAMES])
        for name, report in rows.items():
            writer.writerow([name, *[f"{v:.4f}" for v in report.as_row()]])


def format_metrics_table(rows: dict) -> str:
    """Aligned text table, four decimals, one row per model."""
    width = max([len("model")] + [len(n) for n in rows])
    head = "model".ljust(width) + "".join(f"  {m:>9}" for m in METRIC_NAMES)
    lines = [head, "-" * len(head)]
    for name, report in rows.items():
        lines.append(name.ljust(width) + "".join(f"  {v:>9.4f}" for v in report.as_row()))
    return "\n".join(lines) + "\n"


def write_curve_csv(points, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["fraction", "model", *METRIC_NAMES])
        for p in points:
            writer.writerow([repr(p.train_fraction), p.model, *[repr(v) for v in p.report.as_row()]])


def read_curve_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            {"fraction": float(r["fraction"]), "model": r["model"],
             **{m: float(r[m]) for m in METRIC_NAMES}}
            for r in csv.DictReader(fh)
        ]
