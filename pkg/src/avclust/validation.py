"""Input validation helpers shared by the functional core and the estimators."""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeError


def as_float_array(x, name="array", ndim=None):
    """Coerce to a finite float64 ndarray, optionally enforcing dimensionality."""
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ShapeError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def check_shape(arr, expected, name="array"):
    """Raise ShapeError unless ``arr.shape == expected``."""
    if tuple(arr.shape) != tuple(expected):
        raise ShapeError(f"{name} has shape {tuple(arr.shape)}, expected {tuple(expected)}")
    return arr
