"""Numerically stable scalar/vector kernels used by the clustering core.

All log-sum-exp style aggregations subtract the running maximum before
exponentiating, so inputs with |z * value| up to ~700 stay clear of
overflow. Everything runs in 64-bit floats.
"""

from __future__ import annotations

import numpy as np

from .exceptions import DegenerateVectorError

# Norms below this are treated as degenerate: true zero up to roundoff.
NORM_EPS = 1e-12


def _as_finite_array(values, name="values"):
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _check_magnitude(z):
    z = float(z)
    if not np.isfinite(z) or z <= 0.0:
        raise ValueError(f"smoothing magnitude z must be positive and finite, got {z}")
    return z


def logsumexp(values, axis=None):
    """Stable log(sum(exp(values))) along ``axis``."""
    arr = np.asarray(values, dtype=np.float64)
    if axis is None:
        arr = arr.ravel()
        axis = 0
        m = float(np.max(arr))
        return m + float(np.log(np.sum(np.exp(arr - m))))
    m = np.max(arr, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(arr - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def smooth_max(values, z):
    """Smooth maximum (1/z) * log(sum_j exp(z * v_j)).

    Overshoots the exact maximum by at most ln(k)/z for k values; the
    bound tightens as z grows.
    """
    arr = _as_finite_array(values)
    z = _check_magnitude(z)
    return float(logsumexp(z * arr.ravel()) / z)


def smooth_min(values, z):
    """Smooth minimum, exactly -smooth_max(-values, z).

    Undershoots the exact minimum by at most ln(k)/z.
    """
    arr = _as_finite_array(values)
    return -smooth_max(-arr, z)


def softmax(values, axis=-1):
    """Stable softmax along ``axis``; slices sum to one."""
    arr = _as_finite_array(values)
    shifted = arr - np.max(arr, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def l2_normalize(v):
    """Scale ``v`` to unit norm; degenerate (near-zero) input is an error."""
    arr = _as_finite_array(v, "vector")
    norm = float(np.linalg.norm(arr))
    if norm < NORM_EPS:
        raise DegenerateVectorError(f"vector norm {norm:.3e} below {NORM_EPS:.0e} guard")
    return arr / norm


def cosine_similarity(a, b):
    """Cosine of the angle between ``a`` and ``b``, in [-1, 1]."""
    a = _as_finite_array(a, "a")
    b = _as_finite_array(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"vectors must share a shape, got {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < NORM_EPS or nb < NORM_EPS:
        raise DegenerateVectorError(
            f"cosine similarity undefined for near-zero vectors (norms {na:.3e}, {nb:.3e})"
        )
    return float(np.clip(np.dot(a.ravel(), b.ravel()) / (na * nb), -1.0, 1.0))
