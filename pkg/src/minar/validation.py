"""Input checks shared by the estimators and the command line."""
import numbers

import numpy as np
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DimensionMismatch, SeriesTooShort

__all__ = ["check_counts", "check_fitted", "check_positive_int", "check_family_name"]


def check_counts(X, min_length=2, n_features=None):
    """Return ``X`` as a (T, N) int64 matrix of non-negative counts.

    A 1-D input is read as a single component. Floats are accepted only
    when every value is integral.
    """
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr[:, None]
    arr = check_array(arr, dtype=None, ensure_2d=True, ensure_min_samples=1,
                      ensure_all_finite=True)
    if not np.issubdtype(arr.dtype, np.number) or np.issubdtype(arr.dtype, np.complexfloating):
        raise ValueError("counts must be numeric")
    if np.issubdtype(arr.dtype, np.floating):
        if np.any(arr != np.round(arr)):
            raise ValueError("counts must be integers")
    if np.any(arr < 0):
        raise ValueError("counts must be non-negative")
    arr = arr.astype(np.int64)
    if arr.shape[0] < min_length:
        raise SeriesTooShort(f"need at least {min_length} time points, got {arr.shape[0]}")
    if n_features is not None and arr.shape[1] != n_features:
        raise DimensionMismatch(f"expected {n_features} components, got {arr.shape[1]}")
    return arr


def check_fitted(estimator, attributes="params_"):
    check_is_fitted(estimator, attributes)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_family_name(family, allowed):
    f = str(family).strip().lower()
    if f not in allowed:
        raise ValueError(f"family must be one of {tuple(allowed)}, got {family!r}")
    return f
