"""Small dense complex linear algebra.

Vectors and matrices are plain ``numpy.ndarray`` objects with complex dtype.
Every function here is pure: inputs are never modified.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DEFAULT_TOL",
    "MAX_HISTORY_BASIS",
    "DimensionError",
    "NotHermitianError",
    "as_vector",
    "as_matrix",
    "matmul",
    "dagger",
    "kron",
    "trace",
    "hermitian_eigenvalues",
    "is_unitary",
    "is_projector",
    "is_hermitian",
    "max_abs",
]

DEFAULT_TOL = 1e-10
# total number of history basis vectors a schedule may span
MAX_HISTORY_BASIS = 2**20


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class NotHermitianError(ValueError):
    """A matrix expected to be Hermitian is not, within tolerance."""


def as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=complex)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"expected a non-empty 1-d vector, got shape {arr.shape}")
    return arr


def as_matrix(a) -> np.ndarray:
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"expected a non-empty 2-d matrix, got shape {arr.shape}")
    return arr


def max_abs(a) -> float:
    """Entrywise infinity norm (largest modulus)."""
    arr = np.asarray(a)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def dagger(a) -> np.ndarray:
    """Conjugate transpose."""
    return as_matrix(a).conj().T


def kron(a, b) -> np.ndarray:
    """Kronecker product; the left factor indexes the most significant digits."""
    return np.kron(as_matrix(a), as_matrix(b))


def trace(a) -> complex:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"trace of non-square matrix {a.shape}")
    return complex(np.trace(a))


def is_hermitian(a, tol: float = DEFAULT_TOL) -> bool:
    a = as_matrix(a)
    return a.shape[0] == a.shape[1] and max_abs(a - a.conj().T) <= tol


def hermitian_eigenvalues(a, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix, descending, with multiplicity.

    Raises
    ------
    NotHermitianError
        If ``max|A - A^dagger| > tol``.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"eigenvalues of non-square matrix {a.shape}")
    residual = max_abs(a - a.conj().T)
    if residual > tol:
        raise NotHermitianError(f"matrix is not Hermitian (max |A - A^H| = {residual:.3e})")
    # symmetrize so the LAPACK driver sees an exactly Hermitian input
    h = 0.5 * (a + a.conj().T)
    return np.linalg.eigvalsh(h)[::-1].copy()


def is_unitary(a, tol: float = DEFAULT_TOL) -> bool:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        return False
    return max_abs(a.conj().T @ a - np.eye(a.shape[0])) <= tol


def is_projector(a, tol: float = DEFAULT_TOL) -> bool:
    """True for an orthogonal projector: Hermitian and idempotent."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        return False
    return is_hermitian(a, tol) and max_abs(a @ a - a) <= tol
