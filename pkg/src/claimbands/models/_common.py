"""Shared feature-matrix plumbing for the model modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FeatureMatrix:
    """A dense float feature matrix with column names."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError(f"feature matrix must be 2-d, got ndim={vals.ndim}")
        names = tuple(str(n) for n in self.names)
        if len(names) != vals.shape[1]:
            raise ValueError(
                f"got {len(names)} names for {vals.shape[1]} feature columns"
            )
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


def as_matrix(X: "np.ndarray | FeatureMatrix") -> np.ndarray:
    """Coerce a FeatureMatrix or array-like to a contiguous float64 2-d array."""
    if isinstance(X, FeatureMatrix):
        return X.values
    arr = np.ascontiguousarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"feature input must be 2-d, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("feature matrix contains non-finite values")
    return arr


def as_target(y: np.ndarray, n_rows: int) -> np.ndarray:
    """Coerce a target vector to float64 and check its length."""
    arr = np.ascontiguousarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"target must be 1-d, got ndim={arr.ndim}")
    if arr.size != n_rows:
        raise ValueError(f"target length {arr.size} does not match {n_rows} rows")
    if not np.all(np.isfinite(arr)):
        raise ValueError("target contains non-finite values")
    return arr
