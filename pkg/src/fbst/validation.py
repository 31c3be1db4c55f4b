"""Input validation helpers shared across the package.

All numeric interfaces run in float64; these helpers coerce and check
shapes once at the public boundary so internal code can assume clean
arrays.
"""

from __future__ import annotations

import numpy as np


def as_float_vector(values, name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_float_matrix(values, name: str = "X") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_matching_rows(X: np.ndarray, y: np.ndarray) -> None:
    if X.shape[0] != y.shape[0]:
        raise ValueError(
            f"X and y disagree on sample count: {X.shape[0]} vs {y.shape[0]}"
        )


def check_feature_index(j: int, n_features: int) -> int:
    j = int(j)
    if not 0 <= j < n_features:
        raise ValueError(f"feature index {j} out of range [0, {n_features})")
    return j


def check_positive(value, name: str):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value
