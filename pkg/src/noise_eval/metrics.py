"""Anomaly scores, ROC-AUC, top-k F1 and evaluation reports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import rankdata

from noise_eval.errors import ShapeError, UndefinedMetricError
from noise_eval.nn import Network, forward


class Aggregator(str, Enum):
    MAX = "max"
    MIN = "min"
    MEAN = "mean"
    MEDIAN = "median"

    def reduce(self, values: np.ndarray) -> np.ndarray:
        """Reduce the last axis of ``values``."""
        fn = {"max": np.max, "min": np.min, "mean": np.mean, "median": np.median}[self.value]
        return fn(values, axis=-1)


def score(net: Network, X, agg: Aggregator | str = Aggregator.MAX) -> np.ndarray:
    """Aggregate the predicted per-feature noise magnitude of each row."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ShapeError(f"expected (n, {net.input_dim}) rows, got shape {X.shape}")
    if X.shape[0] == 0:
        return np.zeros(0)
    out, _ = forward(net, X)
    return Aggregator(agg).reduce(out.astype(np.float64))


def _check_labels(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ShapeError(f"{s.size} scores but {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return s, y.astype(bool)


def auc(scores, labels) -> float:
    """ROC-AUC as the Mann-Whitney statistic with mid-ranks for ties."""
    s, y = _check_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both normal and anomalous rows")
    ranks = rankdata(s, method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def f1_topk(scores, labels) -> tuple[float, float]:
    """F1 of the anomaly class when the ``k`` highest scores are flagged.

    ``k`` is the number of true anomalies. Ties are broken by original
    position, so exactly ``k`` rows are flagged. Returns ``(f1, tau)`` where
    ``tau`` is the ``k``-th largest score.
    """
    s, y = _check_labels(scores, labels)
    k = int(y.sum())
    if k == 0:
        raise UndefinedMetricError("top-k F1 needs at least one anomaly")
    pred = topk_mask(s, k)
    tp = int(np.sum(pred & y))
    fp = k - tp
    fn = k - tp
    f1 = 2 * tp / (2 * tp + fp + fn)
    return float(f1), float(s[pred].min())


def topk_mask(scores, k: int) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-s, kind="stable")
    mask = np.zeros(s.size, dtype=bool)
    mask[order[:k]] = True
    return mask


def quantile_threshold(train_scores, q: float = 0.99) -> float:
    """Deployment threshold: the ``q``-quantile of scores on training rows."""
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return float(np.quantile(np.asarray(train_scores, dtype=np.float64), q))


@dataclass
class EvalReport:
    scores: np.ndarray
    labels: np.ndarray
    auc: float
    f1: float
    threshold: float
    row_index: np.ndarray | None = None
    config_echo: dict = field(default_factory=dict)

    @property
    def predicted(self) -> np.ndarray:
        return topk_mask(self.scores, int(np.sum(self.labels)))

    def summary(self) -> dict:
        return {
            "auc": self.auc,
            "f1": self.f1,
            "threshold": self.threshold,
            "n_rows": int(self.scores.size),
            "n_anomalies": int(np.sum(self.labels)),
            "config": self.config_echo,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path) -> None:
        index = self.row_index if self.row_index is not None else np.arange(self.scores.size)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row_index", "score", "label", "predicted"])
            for i, s, y, p in zip(index, self.scores, self.labels, self.predicted):
                w.writerow([int(i), repr(float(s)), int(y), int(p)])


def evaluate(net: Network, X, labels, agg=Aggregator.MAX, row_index=None, config_echo=None) -> EvalReport:
    scores = score(net, X, agg)
    labels = np.asarray(labels, dtype=np.int64)
    f1, tau = f1_topk(scores, labels)
    return EvalReport(
        scores=scores,
        labels=labels,
        auc=auc(scores, labels),
        f1=f1,
        threshold=tau,
        row_index=None if row_index is None else np.asarray(row_index),
        config_echo=dict(config_echo or {}),
    )
