"""Sample tables, CSV persistence, and stratified fold planning.

A FeatureTable is the unit of data everywhere in this package: a dense
row-major matrix of 60 channel features plus one time feature, a class
label per row, and a single days-post-infection tag for the whole table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
import pandas as pd

VALID_DPI = (0, 1, 2, 3, 7)
N_CHANNELS = 60
CANONICAL_FEATURE_NAMES = tuple(f"ch{i:02d}" for i in range(1, N_CHANNELS + 1)) + ("time",)


class ClassLabel(IntEnum):
    """The three culture states. Ordinal encoding is stable across runs."""

    CONTROL = 0
    DENV2 = 1
    ZIKV = 2

    @classmethod
    def from_token(cls, token: str) -> "ClassLabel":
        try:
            return _TOKEN_TO_LABEL[token]
        except KeyError:
            raise ValueError(f"unknown class label token {token!r}") from None

    @property
    def token(self) -> str:
        return _LABEL_TO_TOKEN[int(self)]


_TOKEN_TO_LABEL = {"Control": ClassLabel.CONTROL, "DENV2": ClassLabel.DENV2, "ZIKV": ClassLabel.ZIKV}
_LABEL_TO_TOKEN = {0: "Control", 1: "DENV2", 2: "ZIKV"}


def validate_dpi(day: int) -> int:
    if day not in VALID_DPI:
        raise ValueError(f"dpi must be one of {VALID_DPI}, got {day!r}")
    return int(day)


class TableFormatError(ValueError):
    """Raised when a CSV file does not satisfy the table schema."""


@dataclass(frozen=True)
class FeatureTable:
    """Immutable sample matrix with per-row labels and a table-wide dpi tag.

    features: (n_rows, n_features) float64, no missing values.
    labels:   (n_rows,) integers in {0, 1, 2}.
    dpi:      one of VALID_DPI.
    feature_names: one name per column; canonical tables use ch01..ch60,time.
    """

    features: np.ndarray
    labels: np.ndarray
    dpi: int
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {feats.shape}")
        if labels.shape != (feats.shape[0],):
            raise ValueError("labels length must equal the number of rows")
        if feats.size and not np.isfinite(feats).all():
            raise ValueError("features contain NaN or infinite values")
        if labels.size and (labels.min() < 0 or labels.max() > 2):
            raise ValueError("labels must be in {0, 1, 2}")
        names = tuple(self.feature_names) or _default_names(feats.shape[1])
        if len(names) != feats.shape[1]:
            raise ValueError("feature_names length must equal the feature count")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dpi", validate_dpi(self.dpi))
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take(self, indices: np.ndarray) -> "FeatureTable":
        """New table with the given rows, in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureTable(self.features[idx], self.labels[idx], self.dpi, self.feature_names)

    def with_features(self, features: np.ndarray, names: tuple[str, ...]) -> "FeatureTable":
        """Same rows/labels/dpi with a replaced feature block."""
        return FeatureTable(features, self.labels, self.dpi, names)


def _default_names(n_features: int) -> tuple[str, ...]:
    if n_features == len(CANONICAL_FEATURE_NAMES):
        return CANONICAL_FEATURE_NAMES
    return tuple(f"f{j:02d}" for j in range(1, n_features + 1))


def save_feature_table(table: FeatureTable, path) -> None:
    """Write a table as CSV: feature columns, then a `label` token column.

    Values are serialized with full round-trip precision (shortest repr), so
    load(save(t)) reproduces every cell bit-exactly.
    """
    df = pd.DataFrame(table.features, columns=list(table.feature_names), copy=False)
    df["label"] = [_LABEL_TO_TOKEN[v] for v in table.labels.tolist()]
    df.to_csv(path, index=False)


def load_feature_table(path, dpi: int) -> FeatureTable:
    """Read and validate a canonical 61-feature CSV (ch01..ch60,time,label).

    Raises TableFormatError on a missing file, wrong header, malformed or
    missing cell (reporting the 1-based file line), or unknown label token.
    """
    path = Path(path)
    if not path.exists():
        raise TableFormatError(f"no such file: {path}")
    df = pd.read_csv(path, float_precision="round_trip", dtype={"label": str})
    expected = list(CANONICAL_FEATURE_NAMES) + ["label"]
    got = list(df.columns)
    if got != expected:
        n_feat = len(got) - 1
        if n_feat != len(CANONICAL_FEATURE_NAMES):
            raise TableFormatError(
                f"{path}: expected {len(CANONICAL_FEATURE_NAMES)} feature columns, found {n_feat}"
            )
        raise TableFormatError(f"{path}: header does not match the canonical schema")
    feats = np.empty((len(df), len(CANONICAL_FEATURE_NAMES)), dtype=np.float64)
    for j, name in enumerate(CANONICAL_FEATURE_NAMES):
        col = pd.to_numeric(df[name], errors="coerce").to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(col))
        if bad.size:
            # +2: one for the header line, one for 1-based numbering
            raise TableFormatError(f"{path}: malformed value in column {name!r} at line {bad[0] + 2}")
        feats[:, j] = col
    labels = np.empty(len(df), dtype=np.int64)
    for i, token in enumerate(df["label"].tolist()):
        if not isinstance(token, str) or token not in _TOKEN_TO_LABEL:
            raise TableFormatError(f"{path}: unknown label token {token!r} at line {i + 2}")
        labels[i] = int(_TOKEN_TO_LABEL[token])
    return FeatureTable(feats, labels, dpi, CANONICAL_FEATURE_NAMES)


@dataclass(frozen=True)
class FoldPlan:
    """Stratified assignment of every row to one of k folds."""

    k: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "assignments", np.asarray(self.assignments, dtype=np.int64))

    def fold_indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == i)


def stratified_kfold(table: FeatureTable, k: int = 10, seed: int = 0) -> FoldPlan:
    """Assign rows to k folds, keeping per-class counts within 1 across folds.

    Rows of each class are shuffled with the seeded generator and dealt
    round-robin, continuing the rotation across classes so overall fold
    sizes also differ by at most one.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    labels = table.labels
    rng = np.random.default_rng(seed)
    assignments = np.empty(table.n_rows, dtype=np.int64)
    cursor = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < k:
            raise ValueError(f"class {int(c)} has {idx.size} rows, fewer than k={k}")
        rng.shuffle(idx)
        assignments[idx] = (cursor + np.arange(idx.size)) % k
        cursor += idx.size
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def materialize_fold(table: FeatureTable, plan: FoldPlan, i: int):
    """Split the table into (train, val, test) for fold i.

    test = fold i, val = fold (i+1) mod k, train = the remaining k-2 folds.
    Row order within each split follows the original table.
    """
    if not 0 <= i < plan.k:
        raise ValueError(f"fold index {i} out of range for k={plan.k}")
    test_idx = plan.fold_indices(i)
    val_idx = plan.fold_indices((i + 1) % plan.k)
    train_mask = (plan.assignments != i) & (plan.assignments != (i + 1) % plan.k)
    train_idx = np.flatnonzero(train_mask)
    return table.take(train_idx), table.take(val_idx), table.take(test_idx)
