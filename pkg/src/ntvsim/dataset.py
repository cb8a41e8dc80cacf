"""Dataset container, feature scaling, and the diagnosis-CSV loader."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ntvsim.errors import ParseError, SchemaError, SplitError

WDBC_FEATURE_COUNT = 30


@dataclass(frozen=True)
class FeatureScaling:
    """Per-feature affine map (x - lo) / (hi - lo) fitted on a training split.

    Training features land in [0, 1]; the top rail saturates at quantization.
    Constant features map to 0.
    """

    lo: np.ndarray
    hi: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        span = self.hi - self.lo
        safe = np.where(span > 0.0, span, 1.0)
        out = (features - self.lo) / safe
        return np.where(span > 0.0, out, 0.0)


def fit_scaling(features: np.ndarray) -> FeatureScaling:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError("features must be a non-empty (n, m) array")
    return FeatureScaling(features.min(axis=0), features.max(axis=0))


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    scaling: FeatureScaling | None = None

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.features.ndim != 2:
            raise ValueError("features must be 2-D")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels length must match feature rows")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0/1")
        self.labels = self.labels.astype(np.uint8)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def scaled_features(self) -> np.ndarray:
        if self.scaling is None:
            raise ValueError("dataset has no scaling attached; split() provides one")
        return self.scaling.transform(self.features)


def load_wdbc(path) -> Dataset:
    """Load the diagnosis CSV: no header, one row per case,
    ``id,diagnosis,<30 numeric features>`` with diagnosis M (positive, label 1)
    or B (label 0). The id column is dropped."""
    features = []
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != WDBC_FEATURE_COUNT + 2:
                raise SchemaError(
                    f"{path}: line {lineno}: expected {WDBC_FEATURE_COUNT + 2} columns, "
                    f"got {len(cells)}"
                )
            diag = cells[1].strip()
            if diag == "M":
                labels.append(1)
            elif diag == "B":
                labels.append(0)
            else:
                raise ParseError(f"{path}: line {lineno}: diagnosis must be M or B, got {diag!r}")
            try:
                features.append([float(c) for c in cells[2:]])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: non-numeric feature cell") from exc
    if not features:
        raise SchemaError(f"{path}: no data rows")
    return Dataset(np.asarray(features), np.asarray(labels))


def save_wdbc(ds: Dataset, path) -> None:
    """Write a dataset back in the diagnosis-CSV layout.

    Original ids are not retained by the loader, so the row index stands in.
    Feature values are written with repr so a reload reproduces them bit for
    bit.
    """
    if ds.n_features != WDBC_FEATURE_COUNT:
        raise SchemaError(
            f"dataset has {ds.n_features} features; the diagnosis layout "
            f"requires {WDBC_FEATURE_COUNT}"
        )
    with open(path, "w") as fh:
        for i in range(ds.n_rows):
            diag = "M" if ds.labels[i] else "B"
            cells = [str(i), diag] + [repr(float(v)) for v in ds.features[i]]
            fh.write(",".join(cells) + "\n")


def split(
    ds: Dataset, ratio: float, rng: np.random.Generator
) -> tuple[Dataset, Dataset]:
    """Stratified train/test split; scaling fitted on the training side is
    attached to both halves."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    train_idx: list[int] = []
    test_idx: list[int] = []
    for label in (0, 1):
        rows = np.flatnonzero(ds.labels == label)
        if rows.size == 0:
            raise SplitError(f"class {label} has no rows; cannot stratify")
        n_train = int(round(ratio * rows.size))
        if n_train == 0 or n_train == rows.size:
            raise SplitError(
                f"class {label} would be empty on one side at ratio {ratio}"
            )
        perm = rng.permutation(rows.size)
        train_idx.extend(rows[perm[:n_train]].tolist())
        test_idx.extend(rows[perm[n_train:]].tolist())
    train_idx_arr = np.sort(np.asarray(train_idx))
    test_idx_arr = np.sort(np.asarray(test_idx))
    scaling = fit_scaling(ds.features[train_idx_arr])
    train = Dataset(ds.features[train_idx_arr], ds.labels[train_idx_arr], scaling)
    test = Dataset(ds.features[test_idx_arr], ds.labels[test_idx_arr], scaling)
    return train, test
