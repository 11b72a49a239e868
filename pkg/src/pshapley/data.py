"""Labeled binary-classification datasets: loading, splitting, synthesis.

A :class:`Dataset` owns the indexing scheme for valuation: every row is a
player identified by a stable integer ``point_id``. Ids are assigned once
(0-based row index at load/generation time) and never renumbered, so values
computed by different methods can be joined by id.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "DataSplit",
    "load_csv",
    "save_csv",
    "split_train_valid",
    "generate_synthetic",
    "standardize_split",
    "split_fingerprint",
]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable feature matrix + binary labels keyed by stable point ids.

    features : (n, d) float64, all entries finite
    labels   : (n,) int64 with entries in {0, 1}
    point_ids: (n,) int64, unique
    """

    features: np.ndarray
    labels: np.ndarray
    point_ids: np.ndarray

    def __post_init__(self):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        if feats.ndim != 2:
            raise ValueError(f"features must be a 2-D matrix, got shape {feats.shape}")
        n, d = feats.shape
        if n < 1 or d < 1:
            raise ValueError(f"dataset needs n >= 1 and d >= 1, got n={n}, d={d}")
        if not np.isfinite(feats).all():
            bad = np.argwhere(~np.isfinite(feats))[0]
            raise ValueError(
                f"non-finite feature value at row {bad[0]}, column {bad[1]}"
            )
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ValueError(
                f"labels must have shape ({n},), got {labels.shape}"
            )
        if not np.isin(labels, (0, 1)).all():
            bad_row = int(np.flatnonzero(~np.isin(labels, (0, 1)))[0])
            raise ValueError(f"label outside {{0, 1}} at row {bad_row}")
        ids = np.asarray(self.point_ids, dtype=np.int64)
        if ids.shape != (n,):
            raise ValueError(f"point_ids must have shape ({n},), got {ids.shape}")
        if np.unique(ids).size != n:
            raise ValueError("point_ids must be unique")
        for arr, name in ((feats, "features"), (labels, "labels"), (ids, "point_ids")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset_rows(self, rows) -> "Dataset":
        """New Dataset from the given row positions; point ids are preserved."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.labels[rows], self.point_ids[rows])

    def rows_for_ids(self, ids) -> np.ndarray:
        """Map point ids to row positions; raises on unknown ids."""
        ids = np.asarray(ids, dtype=np.int64)
        order = np.argsort(self.point_ids, kind="stable")
        sorted_ids = self.point_ids[order]
        pos = np.searchsorted(sorted_ids, ids)
        bad = (pos >= sorted_ids.size) | (sorted_ids[np.minimum(pos, sorted_ids.size - 1)] != ids)
        if bad.any():
            unknown = ids[bad][:5].tolist()
            raise KeyError(f"unknown point ids: {unknown}")
        return order[pos]


@dataclass(frozen=True, eq=False)
class DataSplit:
    """Train/validation pair: train rows are the players, validation scores them."""

    train: Dataset
    validation: Dataset

    def __post_init__(self):
        if self.train.d != self.validation.d:
            raise ValueError(
                f"feature dimensionality mismatch: train d={self.train.d}, "
                f"validation d={self.validation.d}"
            )
        if self.validation.n < 1:
            raise ValueError("validation set must be nonempty")
        overlap = np.intersect1d(self.train.point_ids, self.validation.point_ids)
        if overlap.size:
            raise ValueError(f"train and validation share point ids: {overlap[:5].tolist()}")


def load_csv(path, label_column: str) -> Dataset:
    """Read a comma-separated, headered, '.'-decimal file into a Dataset.

    All non-label columns must be numeric; the label column must contain only
    0/1. Row order is preserved and point ids are 0-based data-row indices.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"empty file: {path}") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ValueError(
                f"label column {label_column!r} not found; columns are {header}"
            )
        label_idx = header.index(label_column)
        feature_cols = [c for i, c in enumerate(header) if i != label_idx]
        feat_rows: list[list[float]] = []
        labels: list[int] = []
        for row_idx, row in enumerate(reader):
            if len(row) != len(header):
                raise ValueError(
                    f"row {row_idx} has {len(row)} cells, expected {len(header)}"
                )
            feats = []
            for col_idx, cell in enumerate(row):
                name = header[col_idx]
                if col_idx == label_idx:
                    try:
                        value = float(cell)
                    except ValueError:
                        raise ValueError(
                            f"non-numeric label {cell!r} at row {row_idx}"
                        ) from None
                    if value not in (0.0, 1.0):
                        raise ValueError(
                            f"label {cell!r} outside {{0, 1}} at row {row_idx}"
                        )
                    labels.append(int(value))
                else:
                    try:
                        value = float(cell)
                    except ValueError:
                        raise ValueError(
                            f"non-numeric value {cell!r} at row {row_idx}, "
                            f"column {name!r}"
                        ) from None
                    if not np.isfinite(value):
                        raise ValueError(
                            f"non-finite value {cell!r} at row {row_idx}, column {name!r}"
                        )
                    feats.append(value)
            feat_rows.append(feats)
    if not feat_rows:
        raise ValueError(f"no data rows in {path}")
    if not feature_cols:
        raise ValueError("file has no feature columns besides the label")
    features = np.array(feat_rows, dtype=np.float64)
    return Dataset(features, np.array(labels), np.arange(len(labels)))


def save_csv(data: Dataset, path, label_column: str = "label") -> None:
    """Write a Dataset back to CSV with full float round-trip precision.

    Feature columns are named f0..f{d-1}; point ids are not stored (they are
    re-derived as row indices on load).
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(data.d)] + [label_column])
        for i in range(data.n):
            writer.writerow(
                [repr(float(v)) for v in data.features[i]] + [int(data.labels[i])]
            )


def _validation_quota(counts: np.ndarray, valid_count: int) -> np.ndarray:
    """Per-class validation counts: proportional, each class in both splits."""
    k = counts.size
    n = int(counts.sum())
    if k > 1:
        if valid_count < k:
            raise ValueError(
                f"validation size {valid_count} cannot contain every source class "
                f"({k} classes present); increase valid_fraction"
            )
        if n - valid_count < k:
            raise ValueError(
                f"train size {n - valid_count} cannot contain every source class "
                f"({k} classes present); decrease valid_fraction"
            )
        if (counts < 2).any():
            rare = int(np.argmin(counts))
            raise ValueError(
                f"class {rare} has only {int(counts.min())} point(s); "
                "it cannot appear in both splits"
            )
    quota = np.rint(valid_count * counts / n).astype(np.int64)
    lo = np.ones(k, dtype=np.int64) if k > 1 else np.zeros(k, dtype=np.int64)
    hi = counts - (1 if k > 1 else 0)
    quota = np.clip(quota, lo, hi)
    # repair rounding drift, largest class first
    by_size = np.argsort(-counts, kind="stable")
    while quota.sum() != valid_count:
        delta = valid_count - int(quota.sum())
        moved = False
        for c in by_size:
            if delta > 0 and quota[c] < hi[c]:
                quota[c] += 1
                moved = True
                break
            if delta < 0 and quota[c] > lo[c]:
                quota[c] -= 1
                moved = True
                break
        if not moved:
            raise ValueError(
                "cannot satisfy stratified split with the requested valid_fraction"
            )
    return quota


def split_train_valid(
    data: Dataset,
    valid_fraction: float,
    seed: int,
    *,
    standardize: bool = False,
) -> DataSplit:
    """Deterministic stratified train/validation split.

    Validation size is round(valid_fraction * n) clamped to [1, n-1]. Every
    class present in the source appears in both splits; configurations where
    that is impossible raise. Row order within each split follows the source.
    """
    if not 0.0 < valid_fraction < 1.0:
        raise ValueError(f"valid_fraction must be in (0, 1), got {valid_fraction}")
    n = data.n
    if n < 2:
        raise ValueError("need at least 2 points to split")
    valid_count = int(np.clip(int(round(valid_fraction * n)), 1, n - 1))
    classes, counts = np.unique(data.labels, return_counts=True)
    quota = _validation_quota(counts, valid_count)
    rng = np.random.default_rng(seed)
    valid_rows: list[np.ndarray] = []
    for cls, take in zip(classes, quota):
        rows = np.flatnonzero(data.labels == cls)
        rows = rng.permutation(rows)
        valid_rows.append(rows[:take])
    valid_mask = np.zeros(n, dtype=bool)
    valid_mask[np.concatenate(valid_rows)] = True
    split = DataSplit(
        train=data.subset_rows(np.flatnonzero(~valid_mask)),
        validation=data.subset_rows(np.flatnonzero(valid_mask)),
    )
    if standardize:
        split = standardize_split(split)
    return split


def standardize_split(split: DataSplit) -> DataSplit:
    """Per-column z-score using mean/std of the train split only.

    Constant columns are left unscaled (std treated as 1). Never applied
    implicitly; callers opt in.
    """
    mu = split.train.features.mean(axis=0)
    sd = split.train.features.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)

    def transform(ds: Dataset) -> Dataset:
        return Dataset((ds.features - mu) / sd, ds.labels, ds.point_ids)

    return DataSplit(train=transform(split.train), validation=transform(split.validation))


def generate_synthetic(
    n_per_class: int,
    d: int,
    class_separation: float,
    noise_fraction: float,
    seed: int,
) -> tuple[Dataset, np.ndarray]:
    """Two unit-variance Gaussian clusters with optional label noise.

    Cluster means sit at -sep/2 and +sep/2 along the first feature axis.
    ``noise_fraction`` of all points (count rounded) get flipped labels, chosen
    without replacement under ``seed``. Returns the dataset and the sorted ids
    of flipped points. Pure function of its arguments.
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if class_separation < 0:
        raise ValueError(f"class_separation must be >= 0, got {class_separation}")
    if not 0.0 <= noise_fraction <= 1.0:
        raise ValueError(f"noise_fraction must be in [0, 1], got {noise_fraction}")
    n = 2 * n_per_class
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((n, d))
    half = class_separation / 2.0
    features[:n_per_class, 0] -= half
    features[n_per_class:, 0] += half
    labels = np.repeat(np.array([0, 1], dtype=np.int64), n_per_class)
    flip_count = int(round(noise_fraction * n))
    flipped = np.sort(rng.choice(n, size=flip_count, replace=False)).astype(np.int64)
    labels[flipped] = 1 - labels[flipped]
    return Dataset(features, labels, np.arange(n)), flipped


def split_fingerprint(split: DataSplit) -> str:
    """Stable hex digest of the split contents (ids, features, labels)."""
    h = hashlib.sha256()
    for ds in (split.train, split.validation):
        h.update(ds.point_ids.tobytes())
        h.update(ds.features.tobytes())
        h.update(ds.labels.tobytes())
    return h.hexdigest()[:16]
