"""Cross-validated experiments over selection strategies, with result files."""

from __future__ import annotations

import csv
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .data import Dataset, FoldPlan, stratified_kfold
from .estimator import GPClassifier
from .model_selection import STRATEGIES
from .stats import BoxStats, TTest, box_stats, mean_std, t_test

log = logging.getLogger(__name__)

METRICS = ("train_error", "valid_error", "test_error", "size", "effort")
RECORD_FIELDS = ("dataset", "strategy", "fold", "repeat", "seed", "train_error", "valid_error",
                 "test_error", "size", "effort", "generation", "tree")
RECORDS_FILE = "records.tsv"
SUMMARY_FILE = "summary.tsv"
FOLD_PLAN_FILE = "fold_plan.tsv"


def derive_seed(master_seed: int, *keys: Union[int, str]) -> int:
    """Stable 64-bit seed from a master seed and a tuple of keys."""
    entropy = [int(master_seed) & 0xFFFFFFFF, (int(master_seed) >> 32) & 0xFFFFFFFF]
    for k in keys:
        if isinstance(k, str):
            # tag strings so "3" and 3 derive different streams
            entropy += [0x5EED, zlib.crc32(k.encode("utf-8"))]
        else:
            entropy.append(int(k))
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def fold_seed(master_seed: int, dataset_id: str) -> int:
    return derive_seed(master_seed, dataset_id, "folds")


def run_seed(master_seed: int, dataset_id: str, strategy: str, fold: int, repeat: int) -> int:
    return derive_seed(master_seed, dataset_id, strategy, fold, repeat)


@dataclass(frozen=True)
class RunConfig:
    strategy: str
    dataset: str
    fold: int
    repeat: int
    seed: int
    params: dict = field(default_factory=dict, hash=False)


@dataclass(frozen=True)
class RunResult:
    dataset: str
    strategy: str
    fold: int
    repeat: int
    seed: int
    train_error: float
    valid_error: Optional[float]
    test_error: float
    size: int
    effort: int
    generation: int
    tree: str

    @property
    def key(self) -> tuple:
        return (self.strategy, self.fold, self.repeat)

    def metric(self, name: str):
        return getattr(self, name)


def run_evolution(config: RunConfig, train_X: np.ndarray, train_y: np.ndarray,
                  test_X: np.ndarray, test_y: np.ndarray) -> RunResult:
    if len(train_y) == 0 or len(test_y) == 0:
        raise ValueError("training and test sets must be nonempty")
    clf = GPClassifier(strategy=config.strategy, random_state=config.seed, **config.params)
    clf.fit(train_X, train_y)
    test_error = float(np.count_nonzero(clf.predict(test_X) != test_y)) / len(test_y)
    return RunResult(
        dataset=config.dataset,
        strategy=config.strategy,
        fold=config.fold,
        repeat=config.repeat,
        seed=config.seed,
        train_error=float(clf.train_error_),
        valid_error=None if clf.validation_error_ is None else float(clf.validation_error_),
        test_error=test_error,
        size=clf.best_size_,
        effort=int(clf.effort_),
        generation=int(clf.best_generation_),
        tree=str(clf.best_tree_),
    )


def _run_job(job):
    config, train_X, train_y, test_X, test_y = job
    result = run_evolution(config, train_X, train_y, test_X, test_y)
    log.info("%s fold %d repeat %d: test %.4f size %d effort %d", config.strategy,
             config.fold, config.repeat, result.test_error, result.size, result.effort)
    return result


# -- summaries -------------------------------------------------------------------

@dataclass
class MetricSummary:
    n: int
    mean: float
    std: float
    degenerate: bool
    box: BoxStats
    ttest: Optional[TTest] = None


@dataclass
class StrategySummary:
    strategy: str
    n_runs: int
    metrics: dict[str, MetricSummary]


@dataclass
class ExperimentSummary:
    sections: dict[str, StrategySummary]
    results: list[RunResult] = field(default_factory=list, repr=False)
    fold_plan: Optional[FoldPlan] = field(default=None, repr=False)

    def __getitem__(self, strategy: str) -> StrategySummary:
        return self.sections[strategy]

    def rows(self) -> list[tuple[str, str, str, str]]:
        """Flat (strategy, metric, statistic, value) rows for the summary file."""
        out = []
        for strat, sec in self.sections.items():
            out.append((strat, "runs", "count", str(sec.n_runs)))
            for name, m in sec.metrics.items():
                b = m.box
                stats = [("n", str(m.n)), ("mean", repr(m.mean)), ("std", repr(m.std)),
                         ("std_degenerate", str(int(m.degenerate))),
                         ("median", repr(b.median)), ("q1", repr(b.q1)), ("q3", repr(b.q3)),
                         ("notch", repr(b.notch)), ("whisker_low", repr(b.whisker_low)),
                         ("whisker_high", repr(b.whisker_high)),
                         ("outliers", ",".join(repr(x) for x in b.outliers))]
                if m.ttest is not None:
                    stats += [("t_vs_baseline", repr(m.ttest.t)), ("p_vs_baseline", repr(m.ttest.p)),
                              ("significant_vs_baseline", str(int(m.ttest.significant)))]
                out.extend((strat, name, s, v) for s, v in stats)
        return out


def summarize(results: Sequence[RunResult]) -> ExperimentSummary:
    """Per-strategy means, standard deviations, box-plot numbers and t-tests against baseline."""
    by_strategy: dict[str, list[RunResult]] = {}
    for r in results:
        by_strategy.setdefault(r.strategy, []).append(r)
    for runs in by_strategy.values():
        runs.sort(key=lambda r: (r.fold, r.repeat))

    def values(runs, name):
        return [float(r.metric(name)) for r in runs if r.metric(name) is not None]

    sections = {}
    baseline = by_strategy.get("baseline")
    for strat, runs in by_strategy.items():
        metrics = {}
        for name in METRICS:
            vals = values(runs, name)
            if not vals:
                continue
            mean, std, degenerate = mean_std(vals)
            tt = None
            if baseline is not None and strat != "baseline":
                base = values(baseline, name)
                if len(base) >= 2 and len(vals) >= 2:
                    tt = t_test(vals, base)
            metrics[name] = MetricSummary(len(vals), mean, std, degenerate, box_stats(vals), tt)
        sections[strat] = StrategySummary(strat, len(runs), metrics)
    return ExperimentSummary(sections, list(results))


# -- orchestration ------------------------------------------------------------------

def run_experiment(dataset: Dataset, strategies: Sequence[str], folds: int = 10, repeats: int = 10,
                   master_seed: int = 0, params: Optional[dict] = None, workers: int = 1,
                   fold_plan: Optional[FoldPlan] = None) -> ExperimentSummary:
    """Run every strategy on every fold ``repeats`` times.

    All strategies share one fold plan, derived from ``master_seed`` and the
    dataset name unless ``fold_plan`` is given.  Each run's seed depends
    only on (master seed, dataset, strategy, fold, repeat).
    """
    for s in strategies:
        if s not in STRATEGIES:
            raise ValueError(f"unknown strategy {s!r}; expected one of {STRATEGIES}")
    params = dict(params or {})
    if fold_plan is None:
        fold_plan = stratified_kfold(np.random.default_rng(fold_seed(master_seed, dataset.name)),
                                     dataset, folds)
    elif len(fold_plan.assignments) != len(dataset):
        raise ValueError("fold plan does not match the dataset size")

    jobs = []
    for strategy in strategies:
        for fold in range(fold_plan.k):
            train = fold_plan.train_indices(fold)
            test = fold_plan.test_indices(fold)
            for repeat in range(repeats):
                seed = run_seed(master_seed, dataset.name, strategy, fold, repeat)
                config = RunConfig(strategy, dataset.name, fold, repeat, seed, params)
                jobs.append((config, dataset.X[train], dataset.y[train],
                             dataset.X[test], dataset.y[test]))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]
    order = {s: i for i, s in enumerate(strategies)}
    results.sort(key=lambda r: (order[r.strategy], r.fold, r.repeat))
    summary = summarize(results)
    summary.fold_plan = fold_plan
    return summary


# -- files ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records(results: Sequence[RunResult], path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(RECORD_FIELDS)
            for r in results:
                w.writerow([_fmt(getattr(r, f)) for f in RECORD_FIELDS])
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc.strerror or exc}") from exc


def write_summary(summary: ExperimentSummary, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(("strategy", "metric", "statistic", "value"))
            w.writerows(summary.rows())
    except OSError as exc:
        raise OSError(f"cannot write summary to {path}: {exc.strerror or exc}") from exc


def write_results(results: Sequence[RunResult], summary: ExperimentSummary,
                  out_dir: Union[str, Path]) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror or exc}") from exc
    records, summ = out_dir / RECORDS_FILE, out_dir / SUMMARY_FILE
    write_records(results, records)
    write_summary(summary, summ)
    return records, summ


def read_records(path: Union[str, Path]) -> list[RunResult]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh, delimiter="\t")
            if reader.fieldnames is None or tuple(reader.fieldnames) != RECORD_FIELDS:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            rows = list(reader)
    except OSError as exc:
        raise OSError(f"cannot read records from {path}: {exc.strerror or exc}") from exc
    out = []
    for row in rows:
        out.append(RunResult(
            dataset=row["dataset"],
            strategy=row["strategy"],
            fold=int(row["fold"]),
            repeat=int(row["repeat"]),
            seed=int(row["seed"]),
            train_error=float(row["train_error"]),
            valid_error=float(row["valid_error"]) if row["valid_error"] else None,
            test_error=float(row["test_error"]),
            size=int(row["size"]),
            effort=int(row["effort"]),
            generation=int(row["generation"]),
            tree=row["tree"],
        ))
    return out


def format_table(summary: ExperimentSummary) -> str:
    """Human-readable table in the layout of the usual results table (effort in 1e9)."""
    head = (f"{'strategy':<11}{'train':>14}{'valid':>14}{'test':>14}"
            f"{'size':>16}{'effort(1e9)':>22}")
    lines = [head, "-" * len(head)]
    for strat, sec in summary.sections.items():
        cells = []
        for name in ("train_error", "valid_error", "test_error"):
            m = sec.metrics.get(name)
            cells.append(f"{'--':>14}" if m is None else
                         f"{100 * m.mean:>7.1f}% {100 * m.std:>4.1f}%")
        s = sec.metrics["size"]
        e = sec.metrics["effort"]
        cells.append(f"{s.mean:>9.1f} {s.std:>6.1f}")
        cells.append(f"{e.mean / 1e9:>13.4g} {e.std / 1e9:>8.3g}")
        lines.append(f"{strat:<11}" + "".join(cells))
    return "\n".join(lines)
