"""Command-line entry point: ``gpselect {run,experiment,summarize}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .data import FoldPlan, load_dataset, normalize, stratified_kfold
from .exceptions import DataError
from .experiment import (
    FOLD_PLAN_FILE,
    SUMMARY_FILE,
    RunConfig,
    fold_seed,
    format_table,
    read_records,
    run_evolution,
    run_experiment,
    run_seed,
    summarize,
    write_results,
    write_summary,
)
from .model_selection import STRATEGIES

log = logging.getLogger("gpselect")


def _label_col(text: str):
    if text == "last":
        return "last"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'last', got {text!r}") from None


def _strategies(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in STRATEGIES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown strategies {bad}; choose from {','.join(STRATEGIES)}")
    return names


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _nonnegative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {value}")
    return value


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, type=Path, help="delimited data file")
    p.add_argument("--label-col", type=_label_col, default="last", help="label column index or 'last'")
    p.add_argument("--delimiter", default=",", help="field delimiter (default ',')")
    p.add_argument("--header", action="store_true", help="skip the first row")
    p.add_argument("--drop-incomplete", action="store_true", help="drop rows with missing values")
    p.add_argument("--first-label", default=None, help="label string mapped to the first class")


def _add_evolution_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--folds", type=_positive, default=10, help="cross-validation folds")
    p.add_argument("--pop", type=_positive, default=1000, help="population size")
    p.add_argument("--gens", type=_nonnegative, default=100, help="number of generations")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--max-depth", type=_positive, default=17, help="tree depth limit")
    p.add_argument("--fold-plan", type=Path, default=None,
                   help="fold plan file: read if it exists, otherwise written")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpselect",
                                     description="GP classifiers with validation-set and parsimony-based "
                                                 "best-of-run selection")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every run")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="a single evolution on one fold")
    _add_data_args(p)
    _add_evolution_args(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="baseline")
    p.add_argument("--fold", type=_nonnegative, default=0)
    p.add_argument("--repeat", type=_nonnegative, default=0)
    p.add_argument("--out", type=Path, default=None, help="directory for records and summary")

    p = sub.add_parser("experiment", help="cross-validated comparison of strategies")
    _add_data_args(p)
    _add_evolution_args(p)
    p.add_argument("--strategies", type=_strategies, default=list(STRATEGIES),
                   help="comma-separated subset of " + ",".join(STRATEGIES))
    p.add_argument("--repeats", type=_positive, default=10, help="runs per fold and strategy")
    p.add_argument("--workers", type=_positive, default=1, help="parallel worker processes")
    p.add_argument("--out", type=Path, required=True, help="directory for records and summary")

    p = sub.add_parser("summarize", help="recompute the summary of a records file")
    p.add_argument("--records", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="summary file to write")
    return parser


def _load(args):
    data = load_dataset(args.dataset, delimiter=args.delimiter, label_col=args.label_col,
                        header=args.header, drop_incomplete=args.drop_incomplete,
                        first_label=args.first_label)
    log.info("loaded %s: %d samples, %d features, classes %s=%d %s=%d", data.name, len(data),
             data.n, data.class_labels[0], data.class_counts()[0], data.class_labels[1],
             data.class_counts()[1])
    return normalize(data)


def _fold_plan(args, data):
    if args.fold_plan is not None and args.fold_plan.exists():
        plan = FoldPlan.load(args.fold_plan, n_samples=len(data))
        if plan.k != args.folds:
            raise DataError(f"{args.fold_plan}: plan has {plan.k} folds, --folds is {args.folds}")
        return plan
    plan = stratified_kfold(np.random.default_rng(fold_seed(args.seed, data.name)), data, args.folds)
    if args.fold_plan is not None:
        plan.save(args.fold_plan)
    return plan


def _params(args) -> dict:
    return {"population_size": args.pop, "generations": args.gens, "max_depth": args.max_depth}


def cmd_run(args) -> int:
    data = _load(args)
    plan = _fold_plan(args, data)
    if args.fold >= plan.k:
        raise DataError(f"--fold {args.fold} out of range for {plan.k} folds")
    train, test = plan.train_indices(args.fold), plan.test_indices(args.fold)
    seed = run_seed(args.seed, data.name, args.strategy, args.fold, args.repeat)
    config = RunConfig(args.strategy, data.name, args.fold, args.repeat, seed, _params(args))
    result = run_evolution(config, data.X[train], data.y[train], data.X[test], data.y[test])
    valid = "--" if result.valid_error is None else f"{result.valid_error:.4f}"
    print(f"strategy={result.strategy} fold={result.fold} repeat={result.repeat} seed={result.seed}")
    print(f"train={result.train_error:.4f} valid={valid} test={result.test_error:.4f} "
          f"size={result.size} effort={result.effort} generation={result.generation}")
    print(result.tree)
    if args.out is not None:
        records, _ = write_results([result], summarize([result]), args.out)
        print(f"wrote {records}")
    return 0


def cmd_experiment(args) -> int:
    data = _load(args)
    plan = _fold_plan(args, data)
    summary = run_experiment(data, args.strategies, folds=plan.k, repeats=args.repeats,
                             master_seed=args.seed, params=_params(args), workers=args.workers,
                             fold_plan=plan)
    records, summ = write_results(summary.results, summary, args.out)
    plan.save(args.out / FOLD_PLAN_FILE)
    print(format_table(summary))
    print(f"wrote {records} and {summ}")
    return 0


def cmd_summarize(args) -> int:
    summary = summarize(read_records(args.records))
    print(format_table(summary))
    if args.out is not None:
        out = args.out / SUMMARY_FILE if args.out.is_dir() else args.out
        write_summary(summary, out)
        print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stdout, force=True)
    handler = {"run": cmd_run, "experiment": cmd_experiment, "summarize": cmd_summarize}[args.command]
    try:
        return handler(args)
    except (DataError, OSError, ValueError) as exc:
        print(f"gpselect: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
