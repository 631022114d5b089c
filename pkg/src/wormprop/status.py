"""Node infection labels and their complex one-hot encoding.

A state assigns each node a label in {0, 1, .., K}: 0 means innocent,
k >= 1 means infected by worm k.  The encoded form is a complex (K, N)
matrix whose column v is one-hot (1+0j at row k-1) for an infected node
and all zeros for an innocent one.  Flattened vectors use node-major
indexing: slot v*K + (k-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, MalformedStatusError
from .validation import check_labels


@dataclass(frozen=True)
class InfectionState:
    """Immutable per-node label vector."""

    labels: np.ndarray

    def __post_init__(self):
        arr = check_labels(self.labels)
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)

    @property
    def node_count(self) -> int:
        return int(self.labels.size)

    def infected(self) -> np.ndarray:
        return self.labels > 0

    def __eq__(self, other) -> bool:
        if isinstance(other, InfectionState):
            return np.array_equal(self.labels, other.labels)
        return NotImplemented

    def __hash__(self):
        return hash(self.labels.tobytes())


def _labels_of(state) -> np.ndarray:
    if isinstance(state, InfectionState):
        return state.labels
    return check_labels(state)


def encode_status(state, worm_count: int) -> np.ndarray:
    """Complex (K, N) one-hot-per-column encoding of a state."""
    labels = check_labels(_labels_of(state), worm_count=worm_count)
    n = labels.size
    matrix = np.zeros((worm_count, n), dtype=np.complex128)
    infected = np.nonzero(labels > 0)[0]
    matrix[labels[infected] - 1, infected] = 1.0 + 0.0j
    return matrix


def decode_status(matrix) -> InfectionState:
    """Exact inverse of :func:`encode_status`.

    Rejects any column that is not strictly one-hot-or-zero with entries
    in {0+0j, 1+0j}.
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise MalformedStatusError(f"status matrix must be 2-D, got shape {matrix.shape}")
    is_one = matrix == 1.0
    is_zero = matrix == 0.0
    if not np.all(is_one | is_zero):
        raise MalformedStatusError("status entries must be exactly 0+0j or 1+0j")
    ones_per_col = is_one.sum(axis=0)
    if ones_per_col.size and ones_per_col.max() > 1:
        raise MalformedStatusError("status column has multiple nonzero entries")
    labels = np.where(ones_per_col > 0, np.argmax(is_one, axis=0) + 1, 0)
    return InfectionState(labels.astype(np.int64))


def flatten_status(matrix: np.ndarray) -> np.ndarray:
    """(K, N) matrix -> (N*K,) vector with slot v*K + (k-1)."""
    return np.ascontiguousarray(matrix.T).reshape(-1)


def unflatten_status(vector: np.ndarray, worm_count: int) -> np.ndarray:
    """(N*K,) vector -> (K, N) matrix."""
    vector = np.asarray(vector)
    if vector.size % worm_count:
        raise DimensionError(f"vector of size {vector.size} is not divisible by K={worm_count}")
    return vector.reshape(-1, worm_count).T


def encode_flat(state, worm_count: int) -> np.ndarray:
    return flatten_status(encode_status(state, worm_count))


def decode_flat(vector: np.ndarray, worm_count: int) -> InfectionState:
    return decode_status(unflatten_status(vector, worm_count))


def node_loss(predicted, truth) -> float:
    """Fraction of nodes whose labels differ (a pseudometric in [0, 1])."""
    a = _labels_of(predicted)
    b = _labels_of(truth)
    if a.size != b.size:
        raise DimensionError(f"state sizes differ: {a.size} vs {b.size}")
    if a.size == 0:
        return 0.0
    return float(np.count_nonzero(a != b)) / a.size
