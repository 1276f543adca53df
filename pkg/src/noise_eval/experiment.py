"""One-class experiments: split, standardize, train, evaluate, aggregate over seeds."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from noise_eval.data import Dataset, Split, Standardizer, fit_standardizer, occ_classes, split_occ
from noise_eval.metrics import Aggregator, EvalReport, evaluate
from noise_eval.nn import Network
from noise_eval.train import TrainConfig, TrainHistory, train

THREADS_ENV = "NOISE_EVAL_THREADS"


@dataclass
class SplitRun:
    split: Split
    standardizer: Standardizer
    net: Network
    history: TrainHistory
    report: EvalReport


@dataclass(frozen=True)
class SeedResult:
    seed: int
    auc: float
    f1: float
    per_class: dict


def run_split(
    ds: Dataset,
    normal_class: int,
    cfg: TrainConfig,
    seed: int,
    agg=Aggregator.MAX,
    train_frac: float = 0.5,
) -> SplitRun:
    """Train and evaluate one model for ``(normal_class, seed)``.

    ``seed`` fixes the split, the initial weights, the noise and the
    shuffling.
    """
    split = split_occ(ds, normal_class, train_frac, seed)
    std = fit_standardizer(split.train_X)
    net, history = train(std.transform(split.train_X), cfg.with_seed(seed))
    report = evaluate(
        net,
        std.transform(split.test_X),
        split.test_y,
        agg,
        row_index=split.test_index,
        config_echo={"seed": seed, "normal_class": ds.class_labels[normal_class]
                     if ds.class_labels else normal_class, "agg": Aggregator(agg).value},
    )
    return SplitRun(split, std, net, history, report)


def _run_seed(args) -> SeedResult:
    ds, classes, cfg, seed, agg, train_frac = args
    per_class = {}
    for c in classes:
        rep = run_split(ds, c, cfg, seed, agg, train_frac).report
        per_class[c] = (rep.auc, rep.f1)
    aucs = [a for a, _ in per_class.values()]
    f1s = [f for _, f in per_class.values()]
    return SeedResult(seed, float(np.mean(aucs)), float(np.mean(f1s)), per_class)


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, jobs):
    """``map`` over ``jobs`` using up to ``$NOISE_EVAL_THREADS`` worker processes."""
    jobs = list(jobs)
    workers = min(worker_count(), len(jobs))
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def run_dataset(
    ds: Dataset,
    cfg: TrainConfig,
    seeds=range(10),
    classes=None,
    agg=Aggregator.MAX,
    train_frac: float = 0.5,
    min_class_size: int = 1,
) -> list[SeedResult]:
    """Per-seed metrics averaged over the normal classes of ``ds``."""
    if classes is None:
        classes = occ_classes(ds, min_class_size)
    jobs = [(ds, list(classes), cfg, s, agg, train_frac) for s in seeds]
    return parallel_map(_run_seed, jobs)


def summarize(results) -> dict:
    """Mean and population standard deviation of AUC and F1 across seeds."""
    aucs = np.array([r.auc for r in results])
    f1s = np.array([r.f1 for r in results])
    return {
        "n_seeds": len(results),
        "auc_mean": float(aucs.mean()),
        "auc_std": float(aucs.std()),
        "f1_mean": float(f1s.mean()),
        "f1_std": float(f1s.std()),
    }
