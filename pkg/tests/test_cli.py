import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from idsfusion import cli, pipeline
from idsfusion.ingest import KDD_SCHEMA, UNSW_SCHEMA, class_counts, extract_labels, load_csv
from idsfusion.tuning import REPORTED_OPTIMA
from idsfusion.evaluation import read_curve_csv
from idsfusion.svg import project
from idsfusion.tuning import read_ledger

SMALL = {"gbm": {"n_estimators": 10}, "forest": {"n_estimators": 10}}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert cli.main(["synth", "--out", str(d), "--n-unsw", "3000", "--n-kdd", "3000", "--seed", "3"]) == 0
    return d


def write_config(path, data_dir, out, **extra):
    cfg = {
        "unsw_csv": str(data_dir / "UNSW-NB15_1.csv"),
        "kdd_csv": str(data_dir / "kddcup.data.csv"),
        "train_fraction": 0.2,
        "model_params": SMALL,
        "curve_fractions": [0.2, 0.3],
        "out_dir": str(out),
        **extra,
    }
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture(scope="module")
def fixed_run(tmp_path_factory, data_dir):
    root = tmp_path_factory.mktemp("run")
    cfg = write_config(root / "cfg.json", data_dir, root / "out", fixed_params=True,
                       train_fraction=0.10, curve_fractions=[0.1, 0.2])
    assert cli.main(["run", "--config", str(cfg)]) == 0
    return root / "out"


def test_run_writes_every_artifact(fixed_run):
    layout = pipeline.Layout(fixed_run)
    for path in (layout.train, layout.test, layout.sources, layout.class_counts, layout.best_params,
                 layout.metrics_csv, layout.metrics_txt, layout.curve_csv, layout.report,
                 layout.summary, layout.timings, layout.chart("class_distribution"),
                 layout.chart("curve_accuracy"), layout.chart("curve_f1")):
        assert path.is_file(), path
    assert not layout.lock.exists()
    for name in pipeline.MODEL_NAMES:
        assert layout.model(name).is_file()
    sources = layout.sources.read_text().splitlines()
    assert sources[1] == "0,f00,Dintpkt,duration" and len(sources) == 49


def test_metrics_recompute_from_artifacts(fixed_run):
    report = json.loads(pipeline.Layout(fixed_run).report.read_text())
    again = pipeline.recompute_metrics(fixed_run, pipeline.MODEL_NAMES)
    for name, r in again.items():
        assert report["metrics"][name]["accuracy"] == r.accuracy
    assert report["tuning"]["gbm"]["params"]["n_estimators"] == 10
    assert report["tuning"]["gbm"]["params"]["max_depth"] == 3


def test_curve_chart_matches_table(fixed_run):
    layout = pipeline.Layout(fixed_run)
    rows = read_curve_csv(layout.curve_csv)
    root = ET.fromstring(layout.chart("curve_accuracy").read_text())
    x_dom = tuple(map(float, root.get("data-x-domain").split()))
    y_dom = tuple(map(float, root.get("data-y-domain").split()))
    lines = {p.get("data-series"): p.get("points") for p in root.iter("{http://www.w3.org/2000/svg}polyline")}
    for name in pipeline.MODEL_NAMES:
        pts = [tuple(map(float, s.split(","))) for s in lines[name].split()]
        expect = [project(r["fraction"], r["accuracy"], x_dom, y_dom) for r in rows if r["model"] == name]
        assert np.allclose(pts, expect, atol=5e-4)


def test_stages_individually(tmp_path, data_dir):
    cfg = write_config(tmp_path / "cfg.json", data_dir, tmp_path / "out", n_iter=2, folds=2,
                       models=["logreg", "forest"])
    assert cli.main(["preprocess", "--config", str(cfg)]) == 0
    assert cli.main(["tune", "--config", str(cfg)]) == 0
    layout = pipeline.Layout(tmp_path / "out")
    best = json.loads(layout.best_params.read_text())
    for name in ("logreg", "forest"):
        ledger = read_ledger(layout.ledger(name))
        assert len(ledger) == 2
        assert best[name]["cv_mean_accuracy"] == max(float(r["mean_accuracy"]) for r in ledger)
    # evaluate before train names the missing stage
    assert cli.main(["evaluate", "--config", str(cfg)]) == cli.EXIT_PRECONDITION
    assert cli.main(["train", "--config", str(cfg)]) == 0
    assert cli.main(["evaluate", "--config", str(cfg)]) == 0


def test_flags_override_config(tmp_path, data_dir, capsys):
    cfg = write_config(tmp_path / "cfg.json", data_dir, tmp_path / "out")
    assert cli.main(["run", "--config", str(cfg), "--dry-run", "--seed", "7",
                     "--smote-scope", "whole", "--models", "gbm"]) == 0
    out = capsys.readouterr().out
    assert "seed = 7" in out and 'smote_scope = "whole"' in out and 'models = ["gbm"]' in out
    assert not (tmp_path / "out").exists()


def test_exit_codes(tmp_path, data_dir, capsys):
    missing = tmp_path / "nope.csv"
    assert cli.main(["preprocess", "--unsw", str(missing), "--kdd", str(missing),
                     "--out", str(tmp_path / "o")]) == cli.EXIT_MISSING_INPUT

    bad = tmp_path / "bad.json"
    bad.write_text('{"train_fraction": 2}')
    assert cli.main(["run", "--config", str(bad)]) == cli.EXIT_CONFIG
    bad.write_text('{"colour": 1}')
    assert cli.main(["run", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--config", str(tmp_path / "absent.json")]) == cli.EXIT_CONFIG

    corrupt = tmp_path / "corrupt.csv"
    corrupt.write_text("1,2,3\n")
    assert cli.main(["preprocess", "--unsw", str(corrupt), "--kdd", str(data_dir / "kddcup.data.csv"),
                     "--out", str(tmp_path / "o2")]) == cli.EXIT_DATA

    cfg = write_config(tmp_path / "cfg.json", data_dir, tmp_path / "o3", fixed_params=True)
    assert cli.main(["evaluate", "--config", str(cfg), "--models", ""]) == cli.EXIT_PRECONDITION
    assert (tmp_path / "o3" / "metrics.csv").read_text() == "model,accuracy,precision,recall,f1\n"

    # SMOTE needs two minority rows: a tiny subsample leaves fewer
    assert cli.main(["preprocess", "--config", str(cfg), "--sample-per-dataset", "40",
                     "--out", str(tmp_path / "o4")]) == cli.EXIT_PRECONDITION
    err = capsys.readouterr().err
    assert "SMOTE" in err or "minority" in err or "class" in err


def test_lock_blocks_concurrent_run(tmp_path, data_dir):
    cfg = write_config(tmp_path / "cfg.json", data_dir, tmp_path / "out", fixed_params=True)
    (tmp_path / "out").mkdir()
    (tmp_path / "out" / ".lock").write_text("123")
    assert cli.main(["run", "--config", str(cfg)]) == cli.EXIT_PRECONDITION


def test_preprocess_cache_is_reused(tmp_path, data_dir):
    cfg = write_config(tmp_path / "cfg.json", data_dir, tmp_path / "out")
    assert cli.main(["preprocess", "--config", str(cfg)]) == 0
    train = pipeline.Layout(tmp_path / "out").train
    stamp = train.stat().st_mtime_ns
    assert cli.main(["preprocess", "--config", str(cfg)]) == 0
    assert train.stat().st_mtime_ns == stamp
    assert cli.main(["preprocess", "--config", str(cfg), "--seed", "1"]) == 0
    assert train.stat().st_mtime_ns != stamp


def test_report_echoes_configuration(fixed_run):
    report = json.loads(pipeline.Layout(fixed_run).report.read_text())
    assert report["config"]["train_fraction"] == 0.10
    for name in pipeline.MODEL_NAMES:
        expected = {**REPORTED_OPTIMA[name], **SMALL.get(name, {})}
        assert report["tuning"][name] == {"params": expected, "source": "fixed", "cv_mean_accuracy": None}


def test_metrics_table_shape(fixed_run):
    with open(pipeline.Layout(fixed_run).metrics_csv) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["model", "accuracy", "precision", "recall", "f1"]
    assert [r[0] for r in rows[1:]] == list(pipeline.MODEL_NAMES)
    assert all(len(r[1].split(".")[1]) == 4 for r in rows[1:])


def test_curve_point_matches_main_evaluation(fixed_run):
    # the curve's 10% point re-derives split, SMOTE and fit from the selected caches
    layout = pipeline.Layout(fixed_run)
    report = json.loads(layout.report.read_text())
    for row in read_curve_csv(layout.curve_csv):
        if row["fraction"] == 0.1:
            for metric in ("accuracy", "precision", "recall", "f1"):
                assert row[metric] == report["metrics"][row["model"]][metric]


def test_class_counts_file(fixed_run, data_dir):
    counts = json.loads(pipeline.Layout(fixed_run).class_counts.read_text())
    for kind, name, schema in (("UNSW", "UNSW-NB15_1.csv", UNSW_SCHEMA), ("KDD", "kddcup.data.csv", KDD_SCHEMA)):
        parsed = class_counts(extract_labels(load_csv(data_dir / name, schema)))
        assert counts[kind]["parsed"] == list(parsed)
    before, after = counts["UNSW"]["before_smote"], counts["UNSW"]["after_smote"]
    assert before[1] < before[0] and after[0] == after[1] == before[0]


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name != "timings.json"}


def test_run_equals_sequential_stages(tmp_path, data_dir):
    cfg = write_config(tmp_path / "cfg.json", data_dir, tmp_path / "a", n_iter=2, folds=2,
                       curve_fractions=[0.2, 0.3])
    assert cli.main(["run", "--config", str(cfg)]) == 0
    for stage in ("preprocess", "tune", "train", "evaluate"):
        assert cli.main([stage, "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a.keys() == b.keys()
    assert [k for k in a if a[k] != b[k]] == []


def test_fresh_preprocess_caches_are_identical(tmp_path, data_dir):
    cfg = write_config(tmp_path / "cfg.json", data_dir, tmp_path / "a")
    for out in ("a", "b"):
        assert cli.main(["preprocess", "--config", str(cfg), "--out", str(tmp_path / out)]) == 0
    assert _tree(tmp_path / "a" / "cache") == _tree(tmp_path / "b" / "cache")
