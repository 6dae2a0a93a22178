"""Small dense complex linear-algebra kernels.

Matrices in this package never exceed 8x8 (16 Tx elements at most in
selection), so everything here favours clarity and input checking over
throughput. The hot Monte Carlo paths use the vectorized helpers at the
bottom of the module instead of the checked scalar entry points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinalgError",
    "SvdResult",
    "Hermitian2Eigen",
    "as_complex_matrix",
    "svd",
    "eig2_symmetric_part",
    "frobenius_sq",
    "dominant_angle",
]

DEGENERATE_TOL = 1e-12
HERMITIAN_TOL = 1e-10


class LinalgError(ValueError):
    """Raised for malformed matrix input (non-finite, wrong shape, ...)."""


@dataclass(frozen=True)
class SvdResult:
    """Singular value decomposition ``m = left @ diag(s) @ right^H``.

    ``singular_values`` is sorted non-increasing and has ``min(rows, cols)``
    entries; ``left`` is ``rows x rows`` and ``right`` is ``cols x cols``.
    """

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        rows = self.left_vectors.shape[0]
        cols = self.right_vectors.shape[0]
        sigma = np.zeros((rows, cols))
        k = len(self.singular_values)
        sigma[:k, :k] = np.diag(self.singular_values)
        return self.left_vectors @ sigma @ self.right_vectors.conj().T


@dataclass(frozen=True)
class Hermitian2Eigen:
    """Eigenpairs of the real symmetric part of a 2x2 Hermitian matrix.

    ``lambda1 <= lambda2``; ``e1`` and ``e2`` are real orthonormal.
    """

    lambda1: float
    lambda2: float
    e1: np.ndarray
    e2: np.ndarray


def as_complex_matrix(m) -> np.ndarray:
    """Return ``m`` as a finite 2-D complex array or raise LinalgError."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise LinalgError(f"expected a 2-D matrix, got shape {arr.shape}")
    if arr.size == 0:
        raise LinalgError("matrix is empty")
    if not np.all(np.isfinite(arr)):
        raise LinalgError("matrix contains non-finite entries")
    return arr


def svd(m) -> SvdResult:
    """Full SVD of a small complex matrix.

    Backed by LAPACK (``numpy.linalg.svd``); the wrapper validates input and
    pins the output conventions.

    Parameters
    ----------
    m : array_like, shape (rows, cols)
        Finite complex matrix.

    Returns
    -------
    SvdResult
    """
    arr = as_complex_matrix(m)
    left, s, right_h = np.linalg.svd(arr, full_matrices=True)
    return SvdResult(
        singular_values=np.asarray(s, dtype=float),
        left_vectors=left,
        right_vectors=right_h.conj().T,
    )


def frobenius_sq(m) -> float:
    """Sum of squared magnitudes of all entries."""
    arr = np.asarray(m, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise LinalgError("matrix contains non-finite entries")
    return float(np.sum(arr.real**2 + arr.imag**2))


def dominant_angle(m00, m11, m01):
    """Angle of the dominant eigenvector of ``[[m00, m01], [m01, m11]]``.

    Works elementwise on arrays. The result lies in ``(-pi/2, pi/2]``; ties
    (``lambda2 - lambda1 <= 1e-12``) resolve to 0.
    """
    m00 = np.asarray(m00, dtype=float)
    m11 = np.asarray(m11, dtype=float)
    m01 = np.asarray(m01, dtype=float)
    diff = m00 - m11
    two_off = 2.0 * m01
    theta = 0.5 * np.arctan2(two_off, diff)
    gap = np.hypot(diff, two_off)
    return np.where(gap <= DEGENERATE_TOL, 0.0, theta)


def eig2_symmetric_part(h) -> Hermitian2Eigen:
    """Closed-form eigendecomposition of ``Re(h)`` for a 2x2 Hermitian ``h``.

    For a real vector ``p`` the quadratic form ``p^T h p`` only sees the
    real symmetric part, so its dominant eigenvector is the maximizer over
    real unit vectors.

    ``e2`` has a non-negative first component (non-negative second when the
    first is zero); degenerate spectra return ``e2 = (1, 0)``.
    """
    arr = as_complex_matrix(h)
    if arr.shape != (2, 2):
        raise LinalgError(f"expected a 2x2 matrix, got shape {arr.shape}")
    if np.max(np.abs(arr - arr.conj().T)) > HERMITIAN_TOL:
        raise LinalgError("matrix is not Hermitian within tolerance")
    re = arr.real
    m00, m11 = re[0, 0], re[1, 1]
    m01 = 0.5 * (re[0, 1] + re[1, 0])
    mean = 0.5 * (m00 + m11)
    half_gap = 0.5 * float(np.hypot(m00 - m11, 2.0 * m01))
    theta = float(dominant_angle(m00, m11, m01))
    if theta >= 0.5 * np.pi:
        e2 = np.array([0.0, 1.0])
    else:
        e2 = np.array([np.cos(theta), np.sin(theta)])
    e1 = np.array([e2[1], -e2[0]])
    if e1[0] < 0 or (e1[0] == 0 and e1[1] < 0):
        e1 = -e1
    return Hermitian2Eigen(
        lambda1=mean - half_gap, lambda2=mean + half_gap, e1=e1, e2=e2
    )


def max_sq_singular_value(m: np.ndarray) -> np.ndarray:
    """Largest squared singular value over the last two axes (batched)."""
    # contiguous input keeps results independent of the caller's memory layout
    m = np.ascontiguousarray(m)
    rows, cols = m.shape[-2:]
    if rows <= cols:
        gram = m @ np.swapaxes(m.conj(), -1, -2)
    else:
        gram = np.swapaxes(m.conj(), -1, -2) @ m
    return np.linalg.eigvalsh(gram)[..., -1]


def sq_singular_values(m: np.ndarray) -> np.ndarray:
    """Squared singular values, non-increasing, over the last two axes."""
    s = np.linalg.svd(np.asarray(m), compute_uv=False)
    return s**2
