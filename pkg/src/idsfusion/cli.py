"""Command-line driver.

Exit codes: 0 success, 2 config error, 3 data/schema error, 4 precondition
error (SMOTE, split, missing prerequisite artifacts, lock held),
5 internal error, 6 missing input file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline, synthetic
from ._accel import backend_name
from .errors import ConfigError, DataError, PreconditionError
from .models import TrainingError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PRECONDITION = 4
EXIT_INTERNAL = 5
EXIT_MISSING_INPUT = 6

logger = logging.getLogger("idsfusion")

COMMANDS = {
    "preprocess": pipeline.cmd_preprocess,
    "tune": pipeline.cmd_tune,
    "train": pipeline.cmd_train,
    "evaluate": pipeline.cmd_evaluate,
    "run": pipeline.cmd_run,
}


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--unsw", help="UNSW-NB15 CSV file")
    p.add_argument("--kdd", help="KDD Cup 1999 CSV file")
    p.add_argument("--sample-per-dataset", type=int, metavar="N",
                   help="stratified subsample of N rows per dataset")
    p.add_argument("--smote-scope", choices=("train", "whole"))
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--models", help="comma-separated subset of gbm,logreg,forest ('' for none)")
    p.add_argument("--fixed-params", action="store_true", default=None,
                   help="skip the search and use the reported optimal hyperparameters")
    p.add_argument("--dry-run", action="store_true", help="print the resolved plan and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="idsfusion",
        description="Multi-dataset intrusion detection: UNSW-NB15 + KDD Cup 1999 fused pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "preprocess": "encode, select, split, SMOTE-balance and fuse the two datasets",
        "tune": "randomized hyperparameter search (or --fixed-params)",
        "train": "fit the selected models with the tuned parameters",
        "evaluate": "metrics table, learning curve, SVG charts and run report",
        "run": "preprocess, tune, train and evaluate in one go",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    synth = sub.add_parser("synth", help="write synthetic UNSW/KDD-format CSV files")
    synth.add_argument("--out", required=True)
    synth.add_argument("--n-unsw", type=int, default=20_000)
    synth.add_argument("--n-kdd", type=int, default=20_000)
    synth.add_argument("--seed", type=int, default=0)
    return parser


def resolve_config(args) -> pipeline.PipelineConfig:
    raw = {}
    if args.config:
        raw = pipeline.PipelineConfig.from_file(args.config).to_dict()
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "unsw_csv": args.unsw,
        "kdd_csv": args.kdd,
        "sample_per_dataset": args.sample_per_dataset,
        "smote_scope": args.smote_scope,
        "train_fraction": args.train_fraction,
        "fixed_params": args.fixed_params,
    }
    if args.models is not None:
        overrides["models"] = [m for m in args.models.split(",") if m]
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return pipeline.PipelineConfig.from_dict(raw)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "synth":
            paths = synthetic.write_synthetic(args.out, args.n_unsw, args.n_kdd, args.seed)
            print("\n".join(str(p) for p in paths))
            return EXIT_OK
        cfg = resolve_config(args)
        if args.dry_run:
            sys.stdout.write(pipeline.plan(cfg))
            return EXIT_OK
        logger.info("kernel backend: %s", backend_name())
        result = COMMANDS[args.command](cfg)
        if args.command in ("evaluate", "run"):
            sys.stdout.write(pipeline.Layout(cfg.out_dir).summary.read_text(encoding="utf-8"))
        elif args.command == "tune":
            print(json.dumps(result, indent=2, sort_keys=True))
        elif args.command == "preprocess":
            print(json.dumps(result, indent=2, sort_keys=True))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
