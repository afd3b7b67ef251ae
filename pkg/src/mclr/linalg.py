"""Small dense linear algebra used by the statistics.

Projections onto the instrument space always go through a thin QR
factorisation; the ``n x n`` projection matrix is never formed.
"""

import numpy as np
import scipy.linalg

from .exceptions import NonPositiveLeadingCoefficient, NotPositiveDefinite, RankDeficient

RANK_TOL = 1e-10
DISCRIMINANT_TOL = 1e-10


def thin_qr(Z):
    """
    Orthonormal basis for the column space of ``Z``.

    Parameters
    ----------
    Z: np.ndarray of dimension (n, k)
        Full column rank matrix with ``k <= n``.

    Returns
    -------
    Q: np.ndarray of dimension (n, k)
        Matrix with orthonormal columns and ``Q Q' = P_Z``.

    Raises
    ------
    RankDeficient:
        If a pivot of the triangular factor falls below
        ``1e-10 * max|Z|`` or ``k > n``.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    n, k = Z.shape
    if k > n:
        raise RankDeficient(f"Z has more columns ({k}) than rows ({n}).")
    scale = np.abs(Z).max() if Z.size else 0.0
    Q, R = np.linalg.qr(Z, mode="reduced")
    pivots = np.abs(np.diag(R))
    if scale == 0.0 or pivots.min() < RANK_TOL * scale:
        raise RankDeficient(
            f"Z is rank deficient (smallest pivot {pivots.min():.3e}, scale {scale:.3e})."
        )
    return Q


def project(Q, Y):
    """Return ``(Q'Y, Y - Q Q'Y)``, the coefficients and the residual."""
    coef = Q.T @ Y
    return coef, Y - Q @ coef


def cholesky_lower(B):
    try:
        return scipy.linalg.cholesky(np.asarray(B, dtype=float), lower=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(f"Cholesky factorisation failed: {exc}") from exc


def gen_eig_smallest(A, B):
    """
    Smallest root of ``det(A - lambda B) = 0`` for symmetric ``A`` and PD ``B``.

    The pencil is reduced with ``B = L L'`` to the standard symmetric problem
    for ``L^{-1} A L^{-T}``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    L = cholesky_lower(B)
    X = scipy.linalg.solve_triangular(L, A, lower=True)
    C = scipy.linalg.solve_triangular(L, X.T, lower=True)
    C = 0.5 * (C + C.T)
    return float(np.linalg.eigvalsh(C)[0])


def rayleigh_excess(A, B, b):
    """
    ``b'Ab / b'Bb`` minus the smallest root of ``det(A - lambda B) = 0``.

    With ``B = L L'``, ``C = L^{-1} A L^{-T} = U diag(w) U'`` and ``y = U'L'b``
    the difference equals ``sum_{i>0} y_i^2 (w_i - w_0) / y'y``, a sum of
    non-negative terms. Subtracting the two quantities directly loses all
    accuracy when ``b`` is close to the minimising direction.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    L = cholesky_lower(B)
    X = scipy.linalg.solve_triangular(L, A, lower=True)
    C = scipy.linalg.solve_triangular(L, X.T, lower=True)
    w, U = np.linalg.eigh(0.5 * (C + C.T))
    y = U.T @ (L.T @ b)
    return float(np.sum(y[1:] ** 2 * (w[1:] - w[0])) / (y @ y))


def quadratic_smallest_root(a, b, c):
    """
    Smaller root ``(-b - sqrt(b^2 - 4ac)) / (2a)`` of ``a x^2 + b x + c``.

    Slightly negative discriminants (relative size below ``1e-10``) are
    clamped to zero.
    """
    if not a > 0:
        raise NonPositiveLeadingCoefficient(f"Leading coefficient must be positive, got {a}.")
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        if disc < -DISCRIMINANT_TOL * max(b * b, abs(4.0 * a * c)):
            raise ValueError(f"Quadratic has complex roots (discriminant {disc:.3e}).")
        disc = 0.0
    return (-b - np.sqrt(disc)) / (2.0 * a)


def pencil_coefficients(bar, tilde):
    """
    Coefficients ``(a, b, c)`` of ``det(bar - x tilde)`` for 2x2 blocks.

    Works elementwise on arrays of entries, ``bar = (p11, p12, p22)`` and
    ``tilde = (q11, q12, q22)``.
    """
    p11, p12, p22 = bar
    q11, q12, q22 = tilde
    a = q11 * q22 - q12 * q12
    b = 2.0 * p12 * q12 - p11 * q22 - p22 * q11
    c = p11 * p22 - p12 * p12
    return a, b, c


def sym_inv_sqrt(A):
    """Symmetric positive definite inverse square root ``R`` with ``R A R = I``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    A = 0.5 * (A + A.T)
    w, V = np.linalg.eigh(A)
    if w.min() <= 1e-14 * np.trace(A):
        raise NotPositiveDefinite(f"Matrix is not positive definite (eigenvalue {w.min():.3e}).")
    R = (V / np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


def sym_sqrt_psd(A):
    """Symmetric square root of a PSD matrix; tiny negative eigenvalues are zeroed."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
