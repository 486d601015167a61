# -*- coding: utf-8 -*-
# chuk_metastable/numerics.py
"""
Dense linear algebra and small numerical utilities shared by every module.

Arrays come in two flavours:

* ``float64`` ndarrays, solved with LAPACK LU through scipy;
* ``object`` ndarrays of mpmath ``mpf`` values bound to a private
  :class:`mpmath.MPContext`, solved with mpmath's LU at that context's
  precision.

Every helper dispatches on the dtype, so the same chain code runs in
double or in extended precision. Each extended computation owns its
context, so concurrent sweeps never share a precision setting.
"""

from __future__ import annotations

import logging
import math
import warnings
from typing import Optional, Sequence

import numpy as np
from mpmath import MPContext
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .exceptions import SingularSystemError
from .types import DOUBLE_PRECISION_BITS, LINEAR_RESIDUAL_TOL

logger = logging.getLogger(__name__)

__all__ = [
    "extended_context",
    "is_extended",
    "lift",
    "lower",
    "solve",
    "solve_scaled_laplacian",
    "neville_extrapolate",
]


# ─────────────────────────────────────────────────────────────────────
# Precision handling
# ─────────────────────────────────────────────────────────────────────


def extended_context(bits: Optional[int]) -> Optional[MPContext]:
    """A fresh mpmath context at ``bits`` of mantissa, or None for float64."""
    if bits is None or bits <= DOUBLE_PRECISION_BITS:
        return None
    ctx = MPContext()
    ctx.prec = int(bits)
    return ctx


def is_extended(values: np.ndarray) -> bool:
    return isinstance(values, np.ndarray) and values.dtype == object


def lift(values, ctx: Optional[MPContext]) -> np.ndarray:
    """Convert floats to ``ctx`` numbers (exactly); identity when ctx is None."""
    arr = np.asarray(values, dtype=float)
    if ctx is None:
        return arr
    if arr.ndim == 0:
        return ctx.mpf(float(arr))
    return np.frompyfunc(ctx.mpf, 1, 1)(arr)


def lower(values) -> np.ndarray:
    """Round extended values back to float64."""
    return np.asarray(values, dtype=float)


def zeros_like_context(shape, ctx: Optional[MPContext]) -> np.ndarray:
    if ctx is None:
        return np.zeros(shape)
    out = np.empty(shape, dtype=object)
    out.fill(ctx.mpf(0))
    return out


def _context_of(values: np.ndarray) -> Optional[MPContext]:
    if not is_extended(values):
        return None
    for v in values.flat:
        ctx = getattr(v, "context", None)
        if ctx is not None:
            return ctx
    return None


# ─────────────────────────────────────────────────────────────────────
# Linear solves
# ─────────────────────────────────────────────────────────────────────


def _check_residual(A: np.ndarray, x: np.ndarray, b: np.ndarray, tol: float) -> None:
    residual = lower(np.abs(A @ x - b)).max(initial=0.0)
    scale = lower(np.abs(A)).sum(axis=1).max(initial=0.0) * lower(np.abs(x)).max(
        initial=0.0
    ) + lower(np.abs(b)).max(initial=0.0)
    if not math.isfinite(residual) or residual > tol * max(scale, 1e-300):
        raise SingularSystemError(
            f"linear solve residual {residual:.3e} exceeds {tol:.1e} relative to {scale:.3e}"
        )


def _solve_float(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", LinAlgWarning)
        try:
            lu, piv = lu_factor(A, check_finite=True)
        except (LinAlgWarning, ValueError, np.linalg.LinAlgError) as e:
            raise SingularSystemError(f"matrix is singular: {e}") from e
    if np.any(np.diag(lu) == 0):
        raise SingularSystemError("matrix is singular: zero pivot in LU factorization")
    return lu_solve((lu, piv), b, check_finite=False)


def _solve_extended(A: np.ndarray, b: np.ndarray, ctx: MPContext) -> np.ndarray:
    M = ctx.matrix(A.tolist())
    columns = b.reshape(b.shape[0], -1)
    out = np.empty(columns.shape, dtype=object)
    for k in range(columns.shape[1]):
        try:
            x = ctx.lu_solve(M, ctx.matrix(columns[:, k].tolist()))
        except ZeroDivisionError as e:
            raise SingularSystemError(f"matrix is numerically singular: {e}") from e
        out[:, k] = [x[i] for i in range(x.rows)]
    return out.reshape(b.shape)


def solve(A: np.ndarray, b: np.ndarray, tol: float = LINEAR_RESIDUAL_TOL) -> np.ndarray:
    """
    Solve ``A x = b`` by LU with partial pivoting.

    Object arrays are solved by mpmath at their own precision; everything
    else by LAPACK.

    Raises:
        SingularSystemError: zero pivot, or relative residual above ``tol``
    """
    if A.shape[0] == 0:
        return b.copy()
    ctx = _context_of(A) or _context_of(b)
    if ctx is not None:
        A_ = A if is_extended(A) else lift(A, ctx)
        b_ = b if is_extended(b) else lift(b, ctx)
        x = _solve_extended(A_, b_, ctx)
        _check_residual(A_, x, b_, tol)
        return x
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    x = _solve_float(A, b)
    _check_residual(A, x, b, tol)
    return x


def solve_scaled_laplacian(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Solve a symmetric diagonally dominant system with Jacobi scaling.

    Weighted graph Laplacians whose weights span many orders of magnitude
    lose accuracy under plain LU; scaling by ``diag(A)^{-1/2}`` on both
    sides keeps the pivots O(1).
    """
    d = np.sqrt(np.abs(np.diag(A)))
    if np.any(d == 0):
        raise SingularSystemError("zero diagonal in Laplacian system")
    scaled = A / np.outer(d, d)
    y = solve(scaled, b / d)
    return y / d


# ─────────────────────────────────────────────────────────────────────
# Extrapolation
# ─────────────────────────────────────────────────────────────────────


def neville_extrapolate(steps: Sequence[float], values: Sequence[float], power: int = 1) -> float:
    """
    Extrapolate ``values(h)`` to ``h = 0`` by polynomial interpolation in ``h**power``.

    With ``power=2`` this is Richardson extrapolation of a central difference.
    """
    xs = [float(h) ** power for h in steps]
    table = [float(v) for v in values]
    if len(xs) != len(table) or not xs:
        raise ValueError("steps and values must be non-empty and aligned")
    n = len(xs)
    for level in range(1, n):
        for i in range(n - level):
            j = i + level
            table[i] = (xs[i] * table[i + 1] - xs[j] * table[i]) / (xs[i] - xs[j])
    return table[0]
