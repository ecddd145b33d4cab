"""Symmetric positive definite matrix helpers.

Thin wrappers over numpy's LAPACK bindings that add the package's error
taxonomy and symmetry checks. Everything takes and returns float64 arrays.
"""

import numpy as np

from .errors import NotSpdError, ShapeError


def _as_square(m):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    return m


def check_symmetric(m, atol_scale=1e-12):
    """Raise NotSpdError unless m is symmetric within atol_scale * max(1, |m|)."""
    m = _as_square(m)
    if m.size == 0:
        return m
    tol = atol_scale * max(1.0, float(np.abs(m).max()))
    skew = float(np.abs(m - m.T).max())
    if not np.isfinite(m).all():
        raise NotSpdError("matrix has non-finite entries")
    if skew > tol:
        raise NotSpdError(f"matrix is not symmetric (max asymmetry {skew:.3e})")
    return m


def cholesky_spd(m, min_pivot=0.0):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    min_pivot > 0 additionally rejects factors whose smallest diagonal entry
    squared falls below min_pivot (used to flag near-singular conditionals).
    """
    m = check_symmetric(m)
    if m.size == 0:
        return m.reshape(0, 0)
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError(f"matrix is not positive definite: {exc}") from None
    if min_pivot > 0.0 and float(lower.diagonal().min()) ** 2 < min_pivot:
        raise NotSpdError(
            f"matrix is positive definite only marginally (pivot below {min_pivot:g})"
        )
    return lower


def solve_spd(m, b):
    """Solve m x = b for symmetric positive definite m via Cholesky."""
    m = _as_square(m)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[:1] != (m.shape[0],):
        raise ShapeError(f"rhs of shape {b.shape} does not match matrix {m.shape}")
    if m.size == 0:
        return b.copy()
    lower = cholesky_spd(m)
    y = np.linalg.solve(lower, b)
    return np.linalg.solve(lower.T, y)


def logdet_spd(m):
    """log det of a symmetric positive definite matrix (0.0 for the empty matrix)."""
    m = _as_square(m)
    if m.size == 0:
        return 0.0
    lower = cholesky_spd(m)
    return float(2.0 * np.log(lower.diagonal()).sum())
