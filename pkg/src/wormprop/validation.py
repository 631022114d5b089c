"""Input validation helpers shared by the public entry points."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionError, InvalidLabelError


def as_rng(seed) -> np.random.Generator:
    """Accept None, an int seed, or a Generator and return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_worm_count(worm_count: int) -> int:
    worm_count = int(worm_count)
    if worm_count < 1:
        raise ValueError(f"worm_count must be >= 1, got {worm_count}")
    return worm_count


def check_power_of_two(worm_count: int) -> int:
    """Worm count admissible for network construction (K = 2**P)."""
    worm_count = int(worm_count)
    if worm_count < 1 or worm_count & (worm_count - 1):
        raise ValueError(f"worm count must be a power of two, got {worm_count}")
    return worm_count


def check_labels(labels, node_count: int | None = None, worm_count: int | None = None) -> np.ndarray:
    """Validate a label vector (0 = innocent, k = infected by worm k)."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise DimensionError(f"labels must be 1-D, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.array_equal(rounded, arr):
            raise InvalidLabelError("labels must be integers")
        arr = rounded
    arr = arr.astype(np.int64, copy=True)
    if node_count is not None and arr.size != node_count:
        raise DimensionError(f"expected {node_count} labels, got {arr.size}")
    if arr.size:
        low, high = arr.min(), arr.max()
        if low < 0 or (worm_count is not None and high > worm_count):
            raise InvalidLabelError(
                f"labels must lie in [0, {worm_count}], found range [{low}, {high}]"
            )
    return arr


def check_label_matrix(X, node_count: int, worm_count: int) -> np.ndarray:
    """Validate a (n_samples, node_count) matrix of label vectors."""
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != node_count:
        raise DimensionError(
            f"expected shape (n_samples, {node_count}), got {np.asarray(X).shape}"
        )
    out = np.empty(arr.shape, dtype=np.int64)
    for i in range(arr.shape[0]):
        out[i] = check_labels(arr[i], node_count, worm_count)
    return out


def check_finite_nonnegative(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if arr.size and arr.min() < 0.0:
        raise ValueError(f"{name} must be non-negative")
    return arr
