"""Distance primitives and special functions shared by the numeric modules.

Vectors and matrices are plain float64 numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

EPS64 = np.finfo(np.float64).eps


def as_vec(a, name: str = "vector") -> np.ndarray:
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


def as_mat(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite values")
    return m


def sq_l2_dist(a, b) -> float:
    """Squared Euclidean distance between two vectors of equal dimension."""
    a = as_vec(a, "a")
    b = as_vec(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    diff = a - b
    return float(np.dot(diff, diff))


def row_sq_norms(x: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", x, x)


def pairwise_sq_dists(queries: np.ndarray, points: np.ndarray,
                      points_sq: np.ndarray | None = None) -> np.ndarray:
    """All squared distances via the ``|q|^2 + |p|^2 - 2 q.p`` expansion.

    Faster than explicit differences but carries rounding error of order
    ``d * eps * (|q|^2 + |p|^2)``; callers needing exact values refine
    (see :mod:`sgn.knn_index`). Negative round-off is clipped to zero.
    Overflow shows up as inf/nan entries rather than a warning.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        if points_sq is None:
            points_sq = row_sq_norms(points)
        out = queries @ points.T
        out *= -2.0
        out += row_sq_norms(queries)[:, None]
        out += points_sq[None, :]
        np.maximum(out, 0.0, out=out)
    return out


def expansion_error_bound(queries_sq: np.ndarray, points_sq_max: float, d: int) -> np.ndarray:
    """Conservative per-query bound on twice the rounding error of :func:`pairwise_sq_dists`."""
    return 8.0 * (d + 2) * EPS64 * (queries_sq + points_sq_max) + 1e-300


def log_unit_ball_volume(d: int) -> float:
    """log of the volume of the d-dimensional unit ball, via log-gamma."""
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    return 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0)


def log_sum_exp(values, axis=None):
    """Max-shifted ``log(sum(exp(values)))``."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty sequence")
    out = logsumexp(v, axis=axis)
    return float(out) if np.ndim(out) == 0 else out
