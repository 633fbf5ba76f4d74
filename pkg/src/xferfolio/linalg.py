"""Symmetric-matrix helpers: PSD repair and PSD square roots."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import NonFiniteError, NotSymmetricError

SYMMETRY_TOL = 1e-8


def _as_square(a: ArrayLike) -> NDArray[np.float64]:
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix contains NaN or Inf")
    return a


def check_symmetric(a: ArrayLike, tol: float = SYMMETRY_TOL) -> NDArray[np.float64]:
    """Return ``a`` symmetrized, raising if its asymmetry exceeds ``tol``.

    The tolerance is absolute for matrices with entries of order one and
    relative to the largest entry otherwise.
    """
    a = _as_square(a)
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    asym = float(np.max(np.abs(a - a.T), initial=0.0))
    if asym > tol * scale:
        raise NotSymmetricError(f"matrix asymmetry {asym:.3e} exceeds tolerance {tol:.1e}")
    return 0.5 * (a + a.T)


def psd_repair(sigma: ArrayLike) -> NDArray[np.float64]:
    """Nearest PSD matrix by eigenvalue clamping.

    Parameters
    ----------
    sigma : (d, d) array_like
        Symmetric matrix (to within ``1e-8``).

    Returns
    -------
    (d, d) ndarray
        ``V diag(max(w, 0)) V^T`` where ``sigma = V diag(w) V^T``. A matrix
        that is already PSD is returned symmetrized but otherwise untouched.

    Raises
    ------
    NotSymmetricError
        If ``sigma`` is not symmetric to tolerance.
    """
    s = check_symmetric(sigma)
    w, v = np.linalg.eigh(s)
    if w.size == 0 or w[0] >= 0.0:
        return s
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.T
    return 0.5 * (out + out.T)


def sqrtm_psd(a: ArrayLike) -> NDArray[np.float64]:
    """Principal square root of a symmetric PSD matrix via ``eigh``.

    Negative eigenvalues (roundoff) are clamped to zero first.
    """
    s = check_symmetric(a)
    w, v = np.linalg.eigh(s)
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return 0.5 * (root + root.T)
