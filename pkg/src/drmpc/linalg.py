"""Small covariance-matrix helpers shared across modules."""

from __future__ import annotations

import numpy as np


def symmetrize(mat: np.ndarray) -> np.ndarray:
    """Return the symmetric part (M + M^T) / 2."""
    return 0.5 * (mat + mat.T)


def check_psd(mat: np.ndarray, name: str = "covariance") -> None:
    """Reject matrices with eigenvalues below -1e-10 * spectral norm."""
    eigvals = np.linalg.eigvalsh(symmetrize(mat))
    scale = float(np.max(np.abs(eigvals))) if eigvals.size else 0.0
    if eigvals.size and float(eigvals[0]) < -1e-10 * max(scale, 1e-300):
        raise ValueError(
            f"{name} is not positive semidefinite "
            f"(min eigenvalue {eigvals[0]:.3e}, scale {scale:.3e})"
        )


def safe_cholesky(mat: np.ndarray, max_doublings: int = 3) -> np.ndarray:
    """Lower Cholesky factor of a PSD matrix, with diagonal jitter on failure.

    Starts from jitter 1e-12 * mean diagonal mass (or an absolute floor when
    the matrix is all zeros, so degenerate inputs still factor) and doubles it
    up to ``max_doublings`` times before giving up.
    """
    sym = symmetrize(np.asarray(mat, dtype=float))
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        pass
    n = sym.shape[0]
    base = float(np.trace(sym)) / n
    jitter = 1e-12 * base if base > 0.0 else 1e-18
    eye = np.eye(n)
    for _ in range(max_doublings + 1):
        try:
            return np.linalg.cholesky(sym + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 2.0
    raise np.linalg.LinAlgError(
        f"Cholesky failed even with jitter {jitter:.3e} on {n}x{n} matrix"
    )
