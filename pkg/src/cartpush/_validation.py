"""Input validation helpers shared by the estimator classes."""

import numpy as np
from sklearn.utils.validation import check_array

from .errors import InsufficientDataError

# columns consumed by the identifier, in order
TRACE_COLUMNS = ("t", "x", "y", "theta", "v_x", "omega", "f_p", "tau")


def check_twists(X):
    """Validate an ``(n, 2)`` array of ``(v, omega)`` rows."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected 2 columns (v, omega), got {X.shape[1]}")
    return X


def check_trace_array(X, min_rows=2):
    """Validate an identification array with columns ``TRACE_COLUMNS``."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=1)
    if X.shape[1] != len(TRACE_COLUMNS):
        raise ValueError(f"expected {len(TRACE_COLUMNS)} columns {TRACE_COLUMNS}, got {X.shape[1]}")
    if X.shape[0] < min_rows:
        raise InsufficientDataError(f"need at least {min_rows} rows, got {X.shape[0]}")
    if np.any(np.diff(X[:, 0]) <= 0):
        raise ValueError("time column must be strictly increasing")
    return X
