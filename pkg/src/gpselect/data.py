"""Dataset loading, [-1, 1] scaling and stratified partitioning."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigurationError, ParseError, SchemaError
from .tree import Sample

MISSING_TOKENS = frozenset({"", "?", "NA", "na", "NaN", "nan"})
FIT_FRACTION = 0.67


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    class_labels: tuple[str, str]
    name: str = "dataset"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or self.X.shape[1] < 1:
            raise SchemaError("feature matrix must be 2-D with at least one column")
        if len(self.X) != len(self.y):
            raise SchemaError("feature and label counts differ")

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return len(self.y)

    @property
    def samples(self) -> list[Sample]:
        return [Sample(x, int(c)) for x, c in zip(self.X, self.y)]

    def class_counts(self) -> tuple[int, int]:
        return int(np.sum(self.y == 0)), int(np.sum(self.y == 1))


def load_dataset(path: Union[str, Path], delimiter: str = ",", label_col: Union[int, str] = "last",
                 header: bool = False, drop_incomplete: bool = False,
                 first_label: Optional[str] = None, name: Optional[str] = None) -> Dataset:
    """Read a delimited text file with one sample per row.

    Labels are mapped to 0/1 in order of first appearance, unless
    ``first_label`` names the label that should become class 0.  Rows with
    missing cells raise :class:`ParseError` unless ``drop_incomplete``.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh, delimiter=delimiter) if any(c.strip() for c in r)]
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from exc
    if header and rows:
        rows = rows[1:]
    if not rows:
        raise ParseError(f"{path}: no data rows")

    width = len(rows[0])
    if width < 2:
        raise ParseError(f"{path}: need at least one feature column and a label column")
    if label_col == "last":
        lcol = width - 1
    else:
        lcol = int(label_col)
        if lcol < 0:
            lcol += width
        if not 0 <= lcol < width:
            raise ParseError(f"{path}: label column {label_col} out of range for {width} columns")

    features, labels = [], []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if len(row) != width:
            raise ParseError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
        cells = [c.strip() for c in row]
        if any(c in MISSING_TOKENS for c in cells):
            if drop_incomplete:
                continue
            col = next(j for j, c in enumerate(cells) if c in MISSING_TOKENS)
            raise ParseError(f"{path}: row {lineno}, column {col + 1}: missing value "
                             "(use drop_incomplete to skip such rows)")
        vec = []
        for j, c in enumerate(cells):
            if j == lcol:
                continue
            try:
                vec.append(float(c))
            except ValueError:
                raise ParseError(f"{path}: row {lineno}, column {j + 1}: "
                                 f"non-numeric value {c!r}") from None
            if not math.isfinite(vec[-1]):
                raise ParseError(f"{path}: row {lineno}, column {j + 1}: non-finite value {c!r}")
        features.append(vec)
        labels.append(cells[lcol])

    if not labels:
        raise ParseError(f"{path}: every row was incomplete")
    distinct = list(dict.fromkeys(labels))
    if len(distinct) != 2:
        raise SchemaError(f"{path}: expected exactly 2 class labels, found {len(distinct)}: "
                          f"{distinct[:5]}")
    if first_label is not None:
        if first_label not in distinct:
            raise SchemaError(f"{path}: label {first_label!r} not present (have {distinct})")
        distinct.sort(key=lambda lab: lab != first_label)
    index = {lab: i for i, lab in enumerate(distinct)}
    return Dataset(np.array(features, dtype=float), np.array([index[lab] for lab in labels]),
                   (distinct[0], distinct[1]), name=name or path.stem)


class SymmetricScaler(TransformerMixin, BaseEstimator):
    """Map each feature linearly onto [-1, 1] using the fitted min and max.

    Constant features map to 0.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, scaler was fitted on {self.n_features_in_}")
        span = self.data_max_ - self.data_min_
        constant = span == 0
        safe = np.where(constant, 1.0, span)
        out = 2.0 * (X - self.data_min_) / safe - 1.0
        out[:, constant] = 0.0
        return out


def normalize(dataset: Dataset) -> Dataset:
    """Scale every feature to [-1, 1] using statistics from the whole dataset."""
    X = SymmetricScaler().fit_transform(dataset.X)
    return Dataset(X, dataset.y.copy(), dataset.class_labels, dataset.name)


@dataclass
class FoldPlan:
    assignments: np.ndarray
    k: int = 10

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def fold_sizes(self) -> list[int]:
        return [int(np.sum(self.assignments == f)) for f in range(self.k)]

    def save(self, path: Union[str, Path]) -> None:
        with Path(path).open("w") as fh:
            fh.write(f"# k={self.k}\n")
            fh.write("sample\tfold\n")
            for i, f in enumerate(self.assignments):
                fh.write(f"{i}\t{int(f)}\n")

    @classmethod
    def load(cls, path: Union[str, Path], n_samples: Optional[int] = None) -> "FoldPlan":
        path = Path(path)
        k = None
        pairs = {}
        try:
            lines = path.read_text().splitlines()
        except OSError as exc:
            raise ParseError(f"{path}: {exc.strerror or exc}") from exc
        for lineno, line in enumerate(lines, start=1):
            line = line.strip()
            if not line or line == "sample\tfold":
                continue
            if line.startswith("#"):
                if line.startswith("# k="):
                    k = int(line[4:])
                continue
            try:
                i, f = (int(v) for v in line.split("\t"))
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: expected '<sample>\\t<fold>'") from None
            pairs[i] = f
        if sorted(pairs) != list(range(len(pairs))):
            raise ParseError(f"{path}: sample indices must be 0..N-1 without gaps")
        if n_samples is not None and len(pairs) != n_samples:
            raise ConfigurationError(f"{path}: plan covers {len(pairs)} samples, dataset has {n_samples}")
        assignments = np.array([pairs[i] for i in range(len(pairs))], dtype=int)
        if k is None:
            k = int(assignments.max()) + 1
        return cls(assignments, k)


def stratified_kfold(rng: np.random.Generator, dataset: Dataset, k: int = 10) -> FoldPlan:
    """Per-class shuffle then round-robin fold assignment.

    The round-robin continues across classes so total fold sizes also
    differ by at most one.
    """
    if k < 2:
        raise ConfigurationError("need at least 2 folds")
    assignments = np.full(len(dataset), -1, dtype=int)
    offset = 0
    for c in (0, 1):
        members = np.flatnonzero(dataset.y == c)
        if len(members) < k:
            raise ConfigurationError(f"class {dataset.class_labels[c]!r} has {len(members)} "
                                     f"samples, fewer than {k} folds")
        members = rng.permutation(members)
        assignments[members] = (offset + np.arange(len(members))) % k
        offset = (offset + len(members)) % k
    return FoldPlan(assignments, k)


def split_fit_validation(rng: np.random.Generator, y: np.ndarray,
                         fit_fraction: float = FIT_FRACTION) -> tuple[np.ndarray, np.ndarray]:
    """Stratified split of sample indices into fitness and validation parts.

    Per class, ``round(fit_fraction * count)`` samples (halves rounded up)
    go to the fitness set.
    """
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ConfigurationError("a fit/validation split needs both classes present")
    fit_idx, valid_idx = [], []
    for c in classes:
        members = rng.permutation(np.flatnonzero(y == c))
        if len(members) < 2:
            raise ConfigurationError(f"class {c} has {len(members)} sample(s); "
                                     "a fit/validation split needs at least 2")
        cut = int(math.floor(fit_fraction * len(members) + 0.5))
        fit_idx.append(members[:cut])
        valid_idx.append(members[cut:])
    return np.sort(np.concatenate(fit_idx)), np.sort(np.concatenate(valid_idx))
