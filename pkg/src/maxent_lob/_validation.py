"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .errors import InvalidInputError


def check_columns(X, n_columns: int, name: str = "X") -> np.ndarray:
    """2-d float array with exactly ``n_columns`` finite columns."""
    try:
        arr = check_array(X, dtype=np.float64, ensure_all_finite=True)
    except ValueError as exc:
        raise InvalidInputError(f"{name}: {exc}") from exc
    if arr.shape[1] != n_columns:
        raise InvalidInputError(f"{name} must have {n_columns} columns, got {arr.shape[1]}")
    return arr


def check_samples(x, name: str = "samples", min_count: int = 2) -> np.ndarray:
    """1-d finite float sample; a single-column 2-d array is flattened."""
    arr = np.asarray(x, float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional")
    if arr.size < min_count:
        raise InvalidInputError(f"{name} needs at least {min_count} values")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    return arr


def check_book_columns(X) -> np.ndarray:
    """Columns ``bid_price, ask_price, bid_size, ask_size``."""
    arr = check_columns(X, 4)
    if np.any(arr[:, 0] >= arr[:, 1]):
        raise InvalidInputError("locked or crossed rows: bid_price must be < ask_price")
    if np.any(arr[:, 2:] <= 0):
        raise InvalidInputError("sizes must be strictly positive")
    return arr
