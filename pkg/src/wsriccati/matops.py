"""Small dense-matrix kernel.

Conventions are fixed package-wide: ``vec`` stacks columns, ``vech`` stacks
the columns of the lower triangle, and every flattened layout is
column-major. All operations are pure functions of their inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import EigenSolverError

__all__ = [
    "as_matrix",
    "symmetrize",
    "vec",
    "vech",
    "unvech",
    "kron",
    "duplication_matrix",
    "elimination_matrix",
    "compress",
    "spectral_radius",
]

#: Relative asymmetry below which a nearly symmetric matrix is silently
#: symmetrized instead of rejected.
SYMMETRY_TOL = 1e-12


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-d float array with finite entries."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def symmetrize(value, name: str = "matrix", tol: float = None) -> np.ndarray:
    """Return (S + S^T)/2 after checking S is square and nearly symmetric.

    Asymmetry up to ``tol`` (relative to the largest entry, default
    ``SYMMETRY_TOL``) is absorbed silently; anything larger is rejected.
    """
    arr = as_matrix(value, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if tol is None:
        tol = SYMMETRY_TOL
    scale = max(1.0, float(np.abs(arr).max()))
    asym = float(np.abs(arr - arr.T).max())
    if asym > tol * scale:
        raise ValueError(
            f"{name} is not symmetric (max asymmetry {asym:.3e} exceeds "
            f"{tol:.1e} relative tolerance)"
        )
    return (arr + arr.T) / 2.0


def vec(mat) -> np.ndarray:
    """Column-stacked vectorization of a matrix."""
    return as_matrix(mat, "vec argument").reshape(-1, order="F")


def vech(mat) -> np.ndarray:
    """Half vectorization: columns of the lower triangle, stacked."""
    arr = as_matrix(mat, "vech argument")
    n = arr.shape[0]
    if arr.shape[1] != n:
        raise ValueError(f"vech requires a square matrix, got shape {arr.shape}")
    return np.concatenate([arr[j:, j] for j in range(n)])


def unvech(values, n: int) -> np.ndarray:
    """Inverse of :func:`vech` onto an n-by-n symmetric matrix."""
    v = np.asarray(values, dtype=float).reshape(-1)
    expected = n * (n + 1) // 2
    if v.size != expected:
        raise ValueError(f"unvech expected length {expected} for n={n}, got {v.size}")
    out = np.zeros((n, n))
    k = 0
    for j in range(n):
        out[j:, j] = v[k : k + n - j]
        out[j, j:] = v[k : k + n - j]
        k += n - j
    return out


def kron(left, right) -> np.ndarray:
    """Kronecker product with the usual block layout."""
    return np.kron(as_matrix(left, "kron left"), as_matrix(right, "kron right"))


def duplication_matrix(n: int) -> np.ndarray:
    """D_n with D_n vech(S) = vec(S) for every symmetric S."""
    if n < 1:
        raise ValueError("duplication_matrix requires n >= 1")
    rows = n * n
    cols = n * (n + 1) // 2
    out = np.zeros((rows, cols))
    k = 0
    for j in range(n):
        for i in range(j, n):
            out[i + j * n, k] = 1.0
            out[j + i * n, k] = 1.0
            k += 1
    return out


def elimination_matrix(n: int) -> np.ndarray:
    """L_n with L_n vec(S) = vech(S) and L_n D_n = I."""
    if n < 1:
        raise ValueError("elimination_matrix requires n >= 1")
    rows = n * (n + 1) // 2
    out = np.zeros((rows, n * n))
    k = 0
    for j in range(n):
        for i in range(j, n):
            out[k, i + j * n] = 1.0
            k += 1
    return out


def compress(mat) -> np.ndarray:
    """Compression L_n D D_n of an n^2-by-n^2 matrix onto vech coordinates."""
    arr = as_matrix(mat, "compress argument")
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"compress requires a square matrix, got shape {arr.shape}")
    n = int(round(arr.shape[0] ** 0.5))
    if n * n != arr.shape[0]:
        raise ValueError(f"compress requires an n^2-sized matrix, got {arr.shape[0]}")
    return elimination_matrix(n) @ arr @ duplication_matrix(n)


def spectral_radius(mat) -> float:
    """Largest eigenvalue magnitude of a square real matrix."""
    arr = as_matrix(mat, "spectral_radius argument")
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"spectral_radius requires a square matrix, got {arr.shape}")
    try:
        eigs = np.linalg.eigvals(arr)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigenvalue computation failed: {exc}") from exc
    return float(np.max(np.abs(eigs)))
