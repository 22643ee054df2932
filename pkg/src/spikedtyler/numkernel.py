"""Dense complex Hermitian linear algebra used throughout the package.

Every function here is pure: inputs are never modified and no state is kept
between calls. Tolerances are relative to the largest eigenvalue or singular
value of the argument.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .exceptions import DegeneracyError, DimensionError, DomainError

RTOL = 1e-12

_POSITIVE_ONLY = {"log", "sqrt", "invsqrt", "power"}


def _check_square(A: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")


def herm(A: np.ndarray) -> np.ndarray:
    """Hermitian part ``(A + A^H) / 2``."""
    A = np.asarray(A)
    _check_square(A)
    return 0.5 * (A + A.conj().T)


def skewh(A: np.ndarray) -> np.ndarray:
    """Skew-Hermitian part ``(A - A^H) / 2``."""
    A = np.asarray(A)
    _check_square(A)
    return 0.5 * (A - A.conj().T)


def gamma2(X: np.ndarray) -> np.ndarray:
    """Second-order truncation ``I + X + X^2 / 2`` of the matrix exponential."""
    X = np.asarray(X)
    _check_square(X)
    return np.eye(X.shape[0], dtype=np.result_type(X, float)) + X + 0.5 * (X @ X)


def eigh(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    A = np.asarray(A)
    _check_square(A)
    return np.linalg.eigh(herm(A))


def _scalar_fn(f: str, t: float | None) -> Callable[[np.ndarray], np.ndarray]:
    if f == "exp":
        return np.exp
    if f == "log":
        return np.log
    if f == "sqrt":
        return np.sqrt
    if f == "invsqrt":
        return lambda x: 1.0 / np.sqrt(x)
    if f == "power":
        if t is None:
            raise ValueError("matrix power requires an exponent t")
        return lambda x: np.exp(t * np.log(x))
    if f == "gamma":
        return lambda x: 1.0 + x + 0.5 * x * x
    raise ValueError(f"unknown matrix function {f!r}")


def hermitian_matfun(A: np.ndarray, f: str, t: float | None = None,
                     rtol: float = RTOL) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenvalues.

    Parameters
    ----------
    A : ndarray of shape (m, m)
        Hermitian matrix. Only its Hermitian part is used.
    f : {"exp", "log", "sqrt", "invsqrt", "power", "gamma"}
        Function to apply. ``"power"`` computes ``A^t = exp(t log A)``.
    t : float, optional
        Exponent for ``"power"``.
    rtol : float
        For the functions that need a positive definite argument, the
        smallest eigenvalue must exceed ``rtol`` times the largest.

    Returns
    -------
    ndarray
        ``V f(Lambda) V^H``, symmetrized.

    Raises
    ------
    DomainError
        If ``f`` requires positive definiteness and ``A`` is not.
    """
    fn = _scalar_fn(f, t)
    w, V = eigh(A)
    if f in _POSITIVE_ONLY:
        scale = max(abs(w[-1]), abs(w[0]))
        if not (w[0] > rtol * scale and w[0] > 0):
            raise DomainError(
                f"matrix function {f!r} needs a positive definite argument; "
                f"smallest eigenvalue is {w[0]:.3e}")
    out = (V * fn(w)) @ V.conj().T
    return herm(out)


def thin_qr(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR decomposition with a real nonnegative diagonal on ``R``."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise DimensionError(f"thin_qr needs a tall matrix, got shape {A.shape}")
    Q, R = np.linalg.qr(A, mode="reduced")
    d = np.diagonal(R)
    mag = np.abs(d)
    phase = np.where(mag > 0, d / np.where(mag > 0, mag, 1.0), 1.0)
    Q = Q * phase
    R = phase.conj()[:, None] * R
    # exact zero imaginary part on the diagonal
    idx = np.arange(R.shape[0])
    R[idx, idx] = np.abs(R[idx, idx])
    return Q, R


def orth_complement(U: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(U)``.

    Built from the trailing columns of the complete QR decomposition of ``U``,
    which makes the choice deterministic.
    """
    U = np.asarray(U)
    p, k = U.shape
    Q, R = np.linalg.qr(U, mode="complete")
    return Q[:, k:]


def polar_unitary_factor(A: np.ndarray, rtol: float = RTOL) -> np.ndarray:
    """Unitary factor ``W V^H`` of the polar decomposition ``A = W S V^H``.

    Also accepts tall matrices, in which case the result has orthonormal
    columns.

    Raises
    ------
    DegeneracyError
        If the smallest singular value is below ``rtol`` times the largest.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise DimensionError(f"polar factor needs a square or tall matrix, got {A.shape}")
    W, s, Vh = np.linalg.svd(A, full_matrices=False)
    if s[-1] <= rtol * s[0] or not np.all(np.isfinite(s)):
        raise DegeneracyError(
            f"polar factor of a (numerically) singular matrix: "
            f"singular values range [{s[-1]:.3e}, {s[0]:.3e}]")
    return W @ Vh


def principal_angles(U: np.ndarray, U_hat: np.ndarray
                     ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Principal angles between ``span(U)`` and ``span(U_hat)``.

    Returns ``(O, theta, O_hat)`` with ``U^H U_hat = O diag(cos theta) O_hat^H``
    and ``theta`` ascending in ``[0, pi/2]``.
    """
    U = np.asarray(U)
    U_hat = np.asarray(U_hat)
    if U.shape != U_hat.shape:
        raise DimensionError(f"shape mismatch {U.shape} vs {U_hat.shape}")
    W, s, Vh = np.linalg.svd(U.conj().T @ U_hat)
    theta = np.arccos(np.clip(s, 0.0, 1.0))
    return W, theta, Vh.conj().T
