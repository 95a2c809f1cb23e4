"""Dense linear algebra used throughout the package.

Thin wrappers around LAPACK (via numpy/scipy) that enforce finiteness and
raise package errors instead of returning garbage on degenerate input.
"""

from __future__ import annotations

import warnings

import numpy as np
import numpy.typing as npt
from scipy import linalg

from .errors import DimensionMismatch, NotPSD, NotSymmetric, SingularMatrix

PIVOT_RTOL = 1e-12
SYMMETRY_TOL = 1e-9
PSD_CLAMP = -1e-9
PSD_REJECT = -1e-6

Array = npt.NDArray[np.float64]


def as_matrix(a, name: str = "matrix") -> Array:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def as_vector(v, name: str = "vector") -> Array:
    x = np.asarray(v, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-dimensional, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def _square(a, name: str) -> Array:
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    return m


def lu(a) -> tuple[Array, npt.NDArray[np.int32]]:
    """LU factorization with a scale-invariant singularity check."""
    m = _square(a, "A")
    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale == 0.0:
        raise SingularMatrix("matrix is identically zero")
    with warnings.catch_warnings():
        # exact singularity is reported below through SingularMatrix
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu_, piv = linalg.lu_factor(m, check_finite=False)
    pivots = np.abs(np.diag(lu_))
    if np.min(pivots) < PIVOT_RTOL * scale:
        raise SingularMatrix(
            f"pivot {np.min(pivots):.3e} below {PIVOT_RTOL:g} x max|A| = {PIVOT_RTOL * scale:.3e}"
        )
    return lu_, piv


def solve(a, b) -> Array:
    """Solve ``a @ x = b`` for square ``a``; ``b`` may be a vector or a matrix."""
    factors = lu(a)
    rhs = np.asarray(b, dtype=float)
    if rhs.shape[0] != factors[0].shape[0]:
        raise DimensionMismatch(f"rhs has {rhs.shape[0]} rows, matrix has {factors[0].shape[0]}")
    if not np.all(np.isfinite(rhs)):
        raise ValueError("rhs has non-finite entries")
    return linalg.lu_solve(factors, rhs, check_finite=False)


def inverse(a) -> Array:
    m = _square(a, "A")
    return solve(m, np.eye(m.shape[0]))


def check_symmetric(s, name: str = "S") -> Array:
    m = _square(s, name)
    if m.size and np.max(np.abs(m - m.T)) > SYMMETRY_TOL:
        raise NotSymmetric(f"{name} is not symmetric (max |S - S^T| = {np.max(np.abs(m - m.T)):.3e})")
    return m


def sym_eigen(s) -> tuple[Array, Array]:
    """Eigenvalues in descending order and the matching orthonormal eigenvector columns."""
    m = check_symmetric(s)
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return w[::-1].copy(), v[:, ::-1].copy()


def psd_sqrt(s) -> Array:
    """Symmetric square root of a positive-semidefinite matrix."""
    w, v = sym_eigen(s)
    if w.size and w.min() < PSD_REJECT:
        raise NotPSD(f"smallest eigenvalue {w.min():.3e} < {PSD_REJECT:g}")
    w = np.where(w < PSD_CLAMP, 0.0, np.clip(w, 0.0, None))
    r = (v * np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)


def least_squares(a, b) -> Array:
    """Minimum-norm minimizer of ``||a @ x - b||_2``."""
    m = as_matrix(a, "A")
    rhs = as_vector(b, "b")
    if m.shape[0] != rhs.shape[0]:
        raise DimensionMismatch(f"A has {m.shape[0]} rows, b has {rhs.shape[0]} entries")
    if m.shape[1] == 0:
        return np.zeros(0)
    x, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    return x


def lambda_max(s) -> float:
    return float(sym_eigen(s)[0][0])
