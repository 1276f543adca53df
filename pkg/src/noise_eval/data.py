"""Tabular data: CSV ingestion, standardization and train/test protocols."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from noise_eval import rng as rngs
from noise_eval.errors import ConfigError, IngestionError, SchemaError, SplitError

STD_FLOOR = 1e-8
# bundled datasets and the label value treated as positive in ``y``
BUILTIN = {"wine": "1", "breastw": "malignant", "glass": "7"}


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with binary labels.

    ``class_ids`` index into ``class_labels`` (the distinct raw values of the
    label column, sorted) and drive the one-class protocol for multi-class
    data. ``y`` is 1 for rows whose label equals the positive label.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    class_ids: np.ndarray | None = None
    class_labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise SchemaError(f"need at least one row and one feature, got shape {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise SchemaError("label vector does not match the number of rows")
        if not np.isin(self.y, (0, 1)).all():
            raise SchemaError("labels must be 0 or 1")
        if not np.all(np.isfinite(self.X)):
            raise SchemaError("features contain non-finite values")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def class_index(self, label) -> int:
        """Map a raw label value (or an integer class id) to a class id."""
        key = str(label).strip()
        if key in self.class_labels:
            return self.class_labels.index(key)
        for i, name in enumerate(self.class_labels):
            if _same_number(name, key):
                return i
        raise ConfigError(
            f"unknown class {label!r}; known classes: {', '.join(self.class_labels)}",
            "normal_class",
        )

    def class_sizes(self) -> np.ndarray:
        groups = self.class_ids if self.class_ids is not None else self.y
        return np.bincount(groups, minlength=max(len(self.class_labels), 2))


def _to_float(text: str) -> float | None:
    try:
        return float(text)
    except ValueError:
        return None


def _same_number(a: str, b: str) -> bool:
    fa, fb = _to_float(a), _to_float(b)
    return fa is not None and fb is not None and fa == fb


def _label_order(values: list[str]) -> list[str]:
    uniq = set(values)
    if all(_to_float(v) is not None for v in uniq):
        return sorted(uniq, key=float)
    return sorted(uniq)


def load_csv(path, label_column: str = "label", positive_label="1") -> Dataset:
    """Read a headed, comma-separated file into a :class:`Dataset`.

    Columns whose cells mostly parse as numbers are numeric; any other column
    is one-hot encoded with its categories in lexicographic order, as
    ``name=category``. Empty, unparseable or non-finite cells raise
    :class:`IngestionError` naming the file line and column.
    """
    path = Path(path)
    positive_label = str(positive_label).strip()
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise SchemaError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if label_column not in header:
        raise SchemaError(f"{path}: label column {label_column!r} not found in header {header}")
    if not body:
        raise SchemaError(f"{path}: no data rows")
    width = len(header)
    for i, r in enumerate(body):
        if len(r) != width:
            raise IngestionError(
                f"{path}: line {i + 2} has {len(r)} fields, header has {width}", row=i + 2
            )

    label_pos = header.index(label_column)
    labels = [r[label_pos].strip() for r in body]
    for i, value in enumerate(labels):
        if not value:
            raise IngestionError(
                f"{path}: line {i + 2}, column {label_column!r}: missing label",
                row=i + 2,
                column=label_column,
            )

    columns = []
    names = []
    for j, name in enumerate(header):
        if j == label_pos:
            continue
        cells = [r[j].strip() for r in body]
        for i, cell in enumerate(cells):
            if not cell:
                raise IngestionError(
                    f"{path}: line {i + 2}, column {name!r}: empty cell", row=i + 2, column=name
                )
        parsed = [_to_float(c) for c in cells]
        if sum(v is not None for v in parsed) * 2 >= len(parsed):
            for i, (cell, v) in enumerate(zip(cells, parsed)):
                if v is None:
                    raise IngestionError(
                        f"{path}: line {i + 2}, column {name!r}: cannot parse {cell!r} as a number",
                        row=i + 2,
                        column=name,
                    )
                if not math.isfinite(v):
                    raise IngestionError(
                        f"{path}: line {i + 2}, column {name!r}: non-finite value {cell!r}",
                        row=i + 2,
                        column=name,
                    )
            columns.append(np.array(parsed, dtype=np.float64))
            names.append(name)
        else:
            for cat in sorted(set(cells)):
                columns.append(np.array([c == cat for c in cells], dtype=np.float64))
                names.append(f"{name}={cat}")
    if not columns:
        raise SchemaError(f"{path}: no feature columns besides {label_column!r}")

    order = _label_order(labels)
    lookup = {v: k for k, v in enumerate(order)}
    class_ids = np.array([lookup[v] for v in labels], dtype=np.int64)
    y = np.array(
        [v == positive_label or _same_number(v, positive_label) for v in labels], dtype=np.int64
    )
    return Dataset(np.column_stack(columns), y, names, class_ids, order)


def builtin_path(name: str) -> Path:
    if name not in BUILTIN:
        raise ConfigError(f"unknown built-in dataset {name!r}; have {sorted(BUILTIN)}", "data")
    return Path(str(resources.files("noise_eval.datasets").joinpath(f"{name}.csv")))


def load_builtin(name: str) -> Dataset:
    """Load one of the bundled UCI datasets (``wine``, ``breastw``, ``glass``)."""
    return load_csv(builtin_path(name), "label", BUILTIN.get(name))


# -- standardization ---------------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.mean.shape[0]:
            raise SchemaError(f"expected {self.mean.shape[0]} columns, got shape {X.shape}")
        return (X - self.mean) / self.std


def fit_standardizer(train_X) -> Standardizer:
    """Column mean and population standard deviation; near-constant columns get std 1."""
    X = np.asarray(train_X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise SchemaError(f"need a non-empty 2-d matrix, got shape {X.shape}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return Standardizer(mean, std)


def apply_standardizer(s: Standardizer, X) -> np.ndarray:
    return s.transform(X)


# -- protocols ---------------------------------------------------------------------


@dataclass(frozen=True)
class Split:
    train_X: np.ndarray
    test_X: np.ndarray
    test_y: np.ndarray
    train_index: np.ndarray
    test_index: np.ndarray
    normal_class: int


def split_occ(ds: Dataset, normal_class: int, train_frac: float = 0.5, seed: int = 0) -> Split:
    """One-class split.

    ``floor(train_frac * n)`` randomly chosen rows of ``normal_class`` form the
    (unlabelled) training set. The test set holds the remaining rows of that
    class with label 0 and every other row with label 1, in file order.

    Groups are ``ds.class_ids``, or the binary labels when those are absent,
    which is how contaminated benchmarks with given labels are split (use
    ``normal_class=0``).
    """
    if not 0 < train_frac < 1:
        raise ConfigError(f"must lie in (0, 1), got {train_frac}", "train_frac")
    groups = ds.class_ids if ds.class_ids is not None else ds.y
    normal_rows = np.flatnonzero(groups == normal_class)
    if normal_rows.size < 2:
        raise SplitError(f"class {normal_class} has {normal_rows.size} rows; need at least 2")
    n_train = int(math.floor(train_frac * normal_rows.size))
    if n_train < 1:
        raise SplitError(f"train_frac={train_frac} leaves no training rows for class {normal_class}")
    perm = rngs.stream(seed, rngs.SPLIT).permutation(normal_rows)
    train_index = np.sort(perm[:n_train])
    held_out = np.ones(ds.n_rows, dtype=bool)
    held_out[train_index] = False
    test_index = np.flatnonzero(held_out)
    test_y = (groups[test_index] != normal_class).astype(np.int64)
    return Split(ds.X[train_index], ds.X[test_index], test_y, train_index, test_index, int(normal_class))


def occ_classes(ds: Dataset, min_class_size: int = 1) -> list[int]:
    """Normal classes to iterate over under the one-class protocol.

    Multi-class data uses every class with at least ``min_class_size`` rows.
    Binary data uses only the class whose rows carry label 0.
    """
    if ds.class_ids is None:
        return [0]
    sizes = np.bincount(ds.class_ids, minlength=len(ds.class_labels))
    if len(ds.class_labels) > 2:
        return [c for c, n in enumerate(sizes) if n >= min_class_size]
    normals = np.unique(ds.class_ids[ds.y == 0])
    if normals.size != 1:
        raise SplitError("binary data needs exactly one class with label 0")
    return [int(normals[0])]


def mean_anomaly_ratio(ds: Dataset, classes) -> float:
    """Average over ``classes`` of the fraction of rows outside the class."""
    sizes = ds.class_sizes()
    return float(np.mean([(ds.n_rows - sizes[c]) / ds.n_rows for c in classes]))


def synth_blobs(n_normal: int, n_anomaly: int, d: int, separation: float, seed: int = 0) -> Dataset:
    """Standard Gaussian normals plus anomalies spread uniformly over a sphere.

    Anomalies sit at distance ``separation`` from the origin in uniformly
    random directions.
    """
    if n_normal < 1 or n_anomaly < 0 or d < 1:
        raise ConfigError("need n_normal >= 1, n_anomaly >= 0 and d >= 1")
    gen = np.random.Generator(np.random.PCG64(seed))
    normals = gen.standard_normal((n_normal, d))
    directions = gen.standard_normal((n_anomaly, d))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    anomalies = separation * directions / np.where(norms == 0, 1.0, norms)
    X = np.vstack([normals, anomalies])
    y = np.r_[np.zeros(n_normal, dtype=np.int64), np.ones(n_anomaly, dtype=np.int64)]
    return Dataset(X, y, [f"x{i}" for i in range(d)], y.copy(), ["0", "1"])
