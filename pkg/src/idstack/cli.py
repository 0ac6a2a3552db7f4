"""Command-line frontend for the full workflow.

Commands: ingest, variants, rank-features, tune, train, predict, evaluate,
compare. Every run is reproducible from its config plus seed; outputs are
CSV reports, text tables, model archives and JSON manifests. Exit codes:
0 success, 2 usage, 3 data problem, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import learners
from .archive import ArchiveError
from .config import RunConfig
from .dataset import DataError, Dataset, ingest_csv, load_cache, save_cache
from .infogain import gains_report
from .learners import FitError
from .metafeatures import DATA_F, FEATURE_SET_KINDS, FULL_F, META_F, assemble_matrix
from .metrics import report
from .pipeline import (
    fit_base_layer,
    fit_stacker,
    load_stacker,
    predict_stacker,
    run_comparison,
    save_stacker,
)
from .reporting import (
    comparison_csv,
    comparison_text,
    gains_csv,
    gains_text,
    metric_report_csv,
    metric_report_text,
)
from .splits import SplitDataset, VariantSpec, all_variant_specs, load_split, make_variant, save_split
from .tuning import base_grid_for, tune_base

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _setup_logging(getattr(args, "out", None))
    try:
        return args.handler(args)
    except (DataError, FitError, ArchiveError, FileNotFoundError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except (ValueError, AssertionError) as exc:
        logger.error("internal invariant violated: %s", exc)
        return EXIT_INTERNAL


def _setup_logging(out_dir: str | None) -> None:
    root = logging.getLogger()
    if not any(isinstance(h, logging.StreamHandler) for h in root.handlers):
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        root.addHandler(console)
        root.setLevel(logging.INFO)
    # timestamps are confined to the log file so other outputs stay idempotent
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        log_path = os.path.join(out_dir, "run.log")
        if not any(getattr(h, "baseFilename", None) == os.path.abspath(log_path)
                   for h in root.handlers):
            fh = logging.FileHandler(log_path)
            fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
            root.addHandler(fh)


def _config_from(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for name in ("seed", "workers", "split_fraction", "feature_set_kind",
                 "feature_policy", "top_k", "base_sample_fraction",
                 "meta_grid_name", "label_column", "normal_value"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    return cfg


def _write(path: str, content: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)


def _write_json(path: str, obj) -> None:
    _write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_splits(args, cfg: RunConfig) -> list[SplitDataset]:
    if getattr(args, "split", None):
        return [load_split(p) for p in args.split]
    if getattr(args, "splits_dir", None):
        names = sorted(n for n in os.listdir(args.splits_dir) if n.endswith(".split"))
        if not names:
            raise DataError(f"no .split files under {args.splits_dir}")
        return [load_split(os.path.join(args.splits_dir, n)) for n in names]
    if getattr(args, "data", None):
        dataset = load_cache(args.data)
        return [make_variant(dataset, spec)
                for spec in all_variant_specs(dataset, cfg.split_fraction, cfg.seed)]
    raise DataError("no input given: use --split, --splits-dir or --data")


def cmd_ingest(args) -> int:
    cfg = _config_from(args)
    dataset = ingest_csv(args.csv, cfg.label_column, cfg.normal_value)
    save_cache(dataset, args.out_cache)
    dropped = sum(1 for k in dataset.schema.feature_kinds if k != "ordinal")
    summary = {
        "name": dataset.name,
        "points": len(dataset),
        "ordinal_features": dataset.n_features,
        "dropped_categorical_columns": dropped,
        "attack_categories": sorted(dataset.schema.attack_categories),
        "skipped_rows": dataset.ingest_skipped_rows,
        "cache": args.out_cache,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_variants(args) -> int:
    cfg = _config_from(args)
    dataset = load_cache(args.data)
    os.makedirs(cfg.out_dir, exist_ok=True)
    manifest = {}
    for spec in all_variant_specs(dataset, cfg.split_fraction, cfg.seed):
        split = make_variant(dataset, spec)
        file_name = f"{spec.variant_name}.split"
        save_split(split, os.path.join(cfg.out_dir, file_name))
        manifest[spec.variant_name] = {
            "file": file_name,
            "excluded_attack": spec.excluded_attack,
            "unknown_pct": round(100.0 * split.unknown_fraction(), 4),
            "train": len(split.train),
            "validation": len(split.validation),
            "test": len(split.test),
        }
    _write_json(os.path.join(cfg.out_dir, "variants.json"), manifest)
    print(f"wrote {len(manifest)} splits to {cfg.out_dir}")
    return EXIT_OK


def cmd_rank_features(args) -> int:
    cfg = _config_from(args)
    splits = _load_splits(args, cfg)
    all_gains = []
    for split in splits:
        layer = fit_base_layer(split, cfg.ensemble_specs(split.train.n_features),
                               cfg.seed, cfg.base_sample_fraction,
                               cfg.feature_policy, cfg.top_k)
        from .dataset import apply_normalization

        train = split.train.replace(
            features=apply_normalization(split.train.features, layer.stats))
        per_kind = {}
        for kind in (DATA_F, META_F, FULL_F):
            matrix, labels, names = assemble_matrix(
                train, layer.models, layer.decisions, layer.reputation, kind,
                precomputed_scores=layer.train_scores if kind != DATA_F else None)
            per_kind[kind] = (matrix, names, labels)
        gains = gains_report(per_kind, cfg.ig_bins)
        all_gains.extend(gains)
        name = split.name
        _write(os.path.join(cfg.out_dir, f"gains_{name}.csv"), gains_csv(gains))
        _write(os.path.join(cfg.out_dir, f"gains_{name}.txt"), gains_text(gains))
        print(gains_text(gains))
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _config_from(args)
    split = _load_splits(args, cfg)[0]
    grid = base_grid_for(args.algorithm, split.train.n_features)
    result = tune_base(args.algorithm, grid, split.train, split.validation,
                       cfg.seed, cfg.tune_repeats, cfg.workers)
    rows = "\n".join(f"{r['candidate']},{r['mcc']:.6f}" for r in result.table_rows())
    _write(os.path.join(cfg.out_dir, f"tune_{args.algorithm}.csv"),
           "candidate,mcc\n" + rows + "\n")
    _write_json(os.path.join(cfg.out_dir, f"tune_{args.algorithm}.json"),
                {"chosen": result.chosen_label, "mcc": result.chosen_mcc})
    print(f"{args.algorithm}: chose {result.chosen_label} (validation MCC "
          f"{result.chosen_mcc:.4f})")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config_from(args)
    split = _load_splits(args, cfg)[0]
    model = fit_stacker(
        split,
        cfg.ensemble_specs(split.train.n_features),
        cfg.meta_grid(),
        cfg.feature_set_kind,
        cfg.seed,
        cfg.workers,
        cfg.base_sample_fraction,
        cfg.feature_policy,
        cfg.top_k,
    )
    save_stacker(model, args.out_model)
    _write_json(args.out_model + ".manifest.json",
                {"config": cfg.to_json(), "provenance": model.provenance})
    print(f"trained {model.feature_set_kind} stacker "
          f"(meta: {model.meta_spec.label()}) -> {args.out_model}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_stacker(args.model)
    dataset = load_cache(args.data)
    preds, scores, rows = predict_stacker(model, dataset)
    algorithms = [m.spec.label() for m, _ in model.ensemble]
    lines = ["index,prediction,score,count,wcount,"
             + ",".join(f"{a}.bin" for a in algorithms)]
    for i, (p, s, row) in enumerate(zip(preds, scores, rows)):
        bins = ",".join(str(row.binary[a]) for a in algorithms)
        lines.append(f"{i},{p},{s:.6f},{row.count},{row.wcount:.6f},{bins}")
    _write(args.out_csv, "\n".join(lines) + "\n")
    print(f"predicted {len(preds)} points -> {args.out_csv} "
          f"({int(preds.sum())} flagged)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config_from(args)
    model = load_stacker(args.model)
    split = _load_splits(args, cfg)[0]
    test = split.test
    preds, scores, _ = predict_stacker(model, test)
    rep = report(preds, scores, test.binary_labels(),
                 np.asarray(test.labels, dtype=object), split.excluded_attack,
                 dataset=test.name, variant=split.excluded_attack,
                 classifier=f"Stacker-{model.feature_set_kind}/{model.meta_spec.label()}")
    _write(os.path.join(cfg.out_dir, "evaluation.csv"), metric_report_csv([rep]))
    _write(os.path.join(cfg.out_dir, "evaluation.txt"), metric_report_text([rep]))
    print(metric_report_text([rep]))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config_from(args)
    splits = _load_splits(args, cfg)
    runs = []
    reports = []
    for split in splits:
        run = run_comparison(
            split,
            cfg.ensemble_specs(split.train.n_features),
            cfg.meta_grid(),
            cfg.seed,
            cfg.workers,
            cfg.base_sample_fraction,
            cfg.feature_policy,
            cfg.top_k,
        )
        runs.append(run)
        reports.extend(run.reports[g] for g in run.GROUPS)
        logger.info("compared %s (excluded=%s)", run.dataset, run.excluded_attack)
    _write(os.path.join(cfg.out_dir, "comparison.csv"), comparison_csv(runs))
    _write(os.path.join(cfg.out_dir, "comparison.txt"), comparison_text(runs))
    _write(os.path.join(cfg.out_dir, "metrics.csv"), metric_report_csv(reports))
    _write_json(os.path.join(cfg.out_dir, "comparison_manifest.json"),
                {"config": cfg.to_json(),
                 "chosen": [run.chosen for run in runs]})
    print(comparison_text(runs))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idstack",
        description="Two-layer supervised-unsupervised stacking for "
                    "anomaly-based intrusion detection.")
    sub = parser.add_subparsers(required=True, metavar="command")

    def common(p: argparse.ArgumentParser, data_inputs: bool = True) -> None:
        p.add_argument("--config", help="JSON run config; flags override it")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        if data_inputs:
            p.add_argument("--split", action="append",
                           help="a .split file (repeatable)")
            p.add_argument("--splits-dir", help="directory of .split files")
            p.add_argument("--data", help="dataset cache; variants are derived")
            p.add_argument("--split-fraction", dest="split_fraction",
                           type=float, default=None)

    p = sub.add_parser("ingest", help="parse a CSV into a dataset cache")
    p.add_argument("--csv", required=True)
    p.add_argument("--label", dest="label_column", default=None)
    p.add_argument("--normal", dest="normal_value", default=None)
    p.add_argument("--out-cache", required=True)
    common(p, data_inputs=False)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("variants", help="emit one split per attack plus the full split")
    p.add_argument("--data", required=True)
    p.add_argument("--split-fraction", dest="split_fraction", type=float, default=None)
    common(p, data_inputs=False)
    p.set_defaults(handler=cmd_variants)

    p = sub.add_parser("rank-features", help="information-gain report per feature set")
    common(p)
    p.set_defaults(handler=cmd_rank_features)

    p = sub.add_parser("tune", help="grid-search one base learner")
    p.add_argument("--algorithm", required=True, choices=sorted(learners.FAMILIES))
    common(p)
    p.set_defaults(handler=cmd_tune)

    p = sub.add_parser("train", help="fit a stacker and save the model archive")
    p.add_argument("--out-model", required=True)
    p.add_argument("--kind", dest="feature_set_kind", choices=FEATURE_SET_KINDS,
                   default=None)
    p.add_argument("--meta-grid", dest="meta_grid_name", choices=("default", "rf"),
                   default=None)
    common(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", help="score a dataset with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-csv", required=True)
    common(p, data_inputs=False)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("evaluate", help="metric report for a saved model on a split")
    p.add_argument("--model", required=True)
    common(p)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("compare", help="four-group comparison on each split")
    p.add_argument("--meta-grid", dest="meta_grid_name", choices=("default", "rf"),
                   default=None)
    common(p)
    p.set_defaults(handler=cmd_compare)

    return parser


if __name__ == "__main__":
    sys.exit(main())
