"""Dense real matrix kernels shared by every other module.

All operations work on plain float64 ``numpy`` arrays in row-major (C)
order.  Symmetric outputs are symmetrized exactly via ``(M + M') / 2`` so
callers can rely on bitwise symmetry.  Public operations never return
NaN or Inf entries for finite inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import NoConvergence, NotPSD, ShapeMismatch

__all__ = [
    "DEFAULT_PSD_TOL",
    "as_matrix",
    "symmetrize",
    "gram",
    "frobenius_inner",
    "frobenius_norm",
    "sym_eig",
    "psd_sqrt",
]

# Relative eigenvalue tolerance for treating a slightly indefinite matrix
# (rounding noise on a Gram matrix) as PSD.
DEFAULT_PSD_TOL = 1e-10


def as_matrix(x, name: str = "x") -> np.ndarray:
    """Coerce ``x`` to a 2-D float64 array and reject non-finite entries."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def symmetrize(s) -> np.ndarray:
    """Exact symmetrization (M + M') / 2."""
    s = np.asarray(s, dtype=np.float64)
    return (s + s.T) / 2.0


def gram(x) -> np.ndarray:
    """Gram matrix x'x, exactly symmetric, PSD up to rounding."""
    x = as_matrix(x)
    return symmetrize(x.T @ x)


def frobenius_inner(x, y) -> float:
    """Trace inner product tr(x'y) = sum_ij x_ij * y_ij.

    The accumulation order is part of the contract: entry products are
    summed sequentially in row-major order, so a plain double loop
    reproduces the result bitwise.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatch(f"shapes {x.shape} and {y.shape} differ")
    prod = (x * y).ravel()
    if prod.size == 0:
        return 0.0
    return float(np.cumsum(prod)[-1])


def frobenius_norm(x) -> float:
    """Frobenius norm sqrt(tr(x'x))."""
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64)))


def sym_eig(s) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    s : array_like
        Symmetric square matrix (symmetrized defensively before the solve).

    Returns
    -------
    (eigenvalues, eigenvectors)
        Eigenvalues in descending order and the orthogonal matrix ``V``
        with matching columns, so that ``V @ diag(w) @ V.T`` reconstructs
        the input.
    """
    s = as_matrix(s, "s")
    if s.shape[0] != s.shape[1]:
        raise ShapeMismatch(f"s must be square, got shape {s.shape}")
    s = symmetrize(s)
    try:
        w, v = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigendecomposition failed for dim {s.shape[0]}: {exc}") from exc
    return w[::-1].copy(), v[:, ::-1].copy()


def psd_sqrt(s, tol: float = DEFAULT_PSD_TOL) -> np.ndarray:
    """Unique PSD square root of a PSD matrix.

    Eigenvalues in ``[-tol * ||s||_F, 0)`` are treated as rounding noise and
    clamped to zero; anything below that floor raises :class:`NotPSD`.
    """
    w, v = sym_eig(s)
    scale = float(np.linalg.norm(np.asarray(s, dtype=np.float64)))
    floor = -tol * scale
    if w[-1] < floor:
        raise NotPSD(f"eigenvalue {w[-1]:.3e} below tolerance floor {floor:.3e}")
    w = np.clip(w, 0.0, None)
    return symmetrize((v * np.sqrt(w)) @ v.T)
