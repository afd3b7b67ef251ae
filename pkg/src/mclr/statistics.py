"""Likelihood-ratio statistics for the homoskedastic linear IV model.

The observed summary used everywhere is the Gram pair ``(Y'P_Z Y, Y'M_Z Y)``
with ``Y = (y1, Y2)``. The statistic with estimated error variance,
``LR1 / (n - k)``, and the conditioning statistic ``T_hat'T_hat`` are both
functions of that pair alone; the known-variance objects (``S_bar``,
``T_bar`` and their residual counterparts) are provided for simulation
oracles.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NotPositiveDefinite, PreconditionError, RankDeficient
from .linalg import (
    pencil_coefficients,
    project,
    rayleigh_excess,
    sym_inv_sqrt,
    thin_qr,
)



def _as_matrix(x, name, n=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise PreconditionError(f"{name} must be a matrix. Got shape {x.shape}.")
    if n is not None and x.shape[0] != n:
        raise PreconditionError(f"{name} must have {n} rows. Got shape {x.shape}.")
    if not np.all(np.isfinite(x)):
        raise PreconditionError(f"{name} contains non-finite entries.")
    return x


@dataclass(frozen=True)
class IVData:
    """
    Observed sample of the linear IV model ``y1 = Y2 beta + u``, ``Y2 = Z Pi2 + V2``.

    Parameters
    ----------
    y1: np.ndarray of dimension (n,)
        Outcomes.
    Y2: np.ndarray of dimension (n, l)
        Endogenous regressors.
    Z: np.ndarray of dimension (n, k)
        Instruments.
    W: np.ndarray of dimension (n, p), optional
        Exogenous regressors, removed by :func:`partial_out`.
    absorbed: int
        Number of exogenous columns already partialled out; reduces the
        effective sample size used for degrees of freedom.
    """

    y1: np.ndarray
    Y2: np.ndarray
    Z: np.ndarray
    W: np.ndarray | None = None
    absorbed: int = 0

    def __post_init__(self):
        y1 = np.asarray(self.y1, dtype=float).reshape(-1)
        if not np.all(np.isfinite(y1)):
            raise PreconditionError("y1 contains non-finite entries.")
        n = y1.shape[0]
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "Y2", _as_matrix(self.Y2, "Y2", n))
        object.__setattr__(self, "Z", _as_matrix(self.Z, "Z", n))
        if self.W is not None:
            object.__setattr__(self, "W", _as_matrix(self.W, "W", n))
        n_eff, k, l = self.n_eff, self.k, self.l
        if n_eff <= k + l:
            raise PreconditionError(
                f"Need n > k + l for a positive definite variance estimate; "
                f"got n={n_eff}, k={k}, l={l}."
            )

    @property
    def n(self):
        return self.y1.shape[0]

    @property
    def n_eff(self):
        return self.n - self.absorbed

    @property
    def k(self):
        return self.Z.shape[1]

    @property
    def l(self):
        return self.Y2.shape[1]

    @property
    def Y(self):
        return np.column_stack([self.y1, self.Y2])


@dataclass(frozen=True)
class Hypothesis:
    """Null hypothesis ``beta = beta0``."""

    beta0: np.ndarray

    def __post_init__(self):
        beta0 = np.atleast_1d(np.asarray(self.beta0, dtype=float)).reshape(-1)
        if not np.all(np.isfinite(beta0)):
            raise PreconditionError("beta0 contains non-finite entries.")
        object.__setattr__(self, "beta0", beta0)

    @property
    def l(self):
        return self.beta0.shape[0]

    @property
    def b0(self):
        return np.concatenate([[1.0], -self.beta0])

    @property
    def A0(self):
        return np.vstack([self.beta0[None, :], np.eye(self.l)])


@dataclass(frozen=True)
class GramPair:
    gp: np.ndarray
    gm: np.ndarray
    n: int
    k: int

    @property
    def l(self):
        return self.gp.shape[0] - 1


@dataclass(frozen=True)
class SixMoments:
    """
    The six inner products ``(S'S, S'T, T'T, S~'S~, S~'T~, T~'T~)`` plus ``(n, k)``.

    ``d2`` and ``d5`` are length-``l`` vectors, ``d3`` and ``d6`` are ``l x l``.
    """

    d1: float
    d2: np.ndarray
    d3: np.ndarray
    d4: float
    d5: np.ndarray
    d6: np.ndarray
    n: int
    k: int

    def __post_init__(self):
        object.__setattr__(self, "d2", np.atleast_1d(np.asarray(self.d2, dtype=float)))
        object.__setattr__(self, "d3", np.atleast_2d(np.asarray(self.d3, dtype=float)))
        object.__setattr__(self, "d5", np.atleast_1d(np.asarray(self.d5, dtype=float)))
        object.__setattr__(self, "d6", np.atleast_2d(np.asarray(self.d6, dtype=float)))

    @property
    def bar_block(self):
        return _block(self.d1, self.d2, self.d3)

    @property
    def tilde_block(self):
        return _block(self.d4, self.d5, self.d6)


@dataclass(frozen=True)
class OmegaHat:
    matrix: np.ndarray
    df: int


def _block(s, st, tt):
    l = st.shape[0]
    out = np.empty((l + 1, l + 1))
    out[0, 0] = s
    out[0, 1:] = st
    out[1:, 0] = st
    out[1:, 1:] = tt
    return out


def partial_out(data):
    """
    Remove exogenous regressors by projecting ``y1``, ``Y2`` and ``Z`` off ``W``.

    The returned sample has ``W`` dropped and ``absorbed`` increased by the
    number of columns of ``W``.
    """
    if data.W is None:
        return data
    p = data.W.shape[1]
    if p >= data.n_eff - data.k - data.l:
        raise RankDeficient(
            f"Too many exogenous regressors: p={p} must be below n - k - l = "
            f"{data.n_eff - data.k - data.l}."
        )
    Qw = thin_qr(data.W)
    _, y1 = project(Qw, data.y1)
    _, Y2 = project(Qw, data.Y2)
    _, Z = project(Qw, data.Z)
    return IVData(y1=y1, Y2=Y2, Z=Z, W=None, absorbed=data.absorbed + p)


def gram_pair(data, Q=None):
    """
    Gram pair ``(Y'P_Z Y, Y'M_Z Y)`` through a thin QR of ``Z``.

    ``Y'M_Z Y`` is formed from explicit residuals rather than by subtraction.
    """
    data = partial_out(data)
    if Q is None:
        Q = thin_qr(data.Z)
    coef, resid = project(Q, data.Y)
    gp = coef.T @ coef
    gm = resid.T @ resid
    return GramPair(gp=0.5 * (gp + gp.T), gm=0.5 * (gm + gm.T), n=data.n_eff, k=data.k)


def estimate_omega(g):
    """Error variance estimate ``Y'M_Z Y / (n - k)``."""
    df = g.n - g.k
    if df <= g.l:
        raise PreconditionError(f"Need n > k + l, got n={g.n}, k={g.k}, l={g.l}.")
    omega = g.gm / df
    if np.linalg.eigvalsh(omega)[0] <= 1e-14 * np.trace(omega):
        raise NotPositiveDefinite("Y'M_Z Y is singular; the columns of Y are collinear.")
    return OmegaHat(matrix=omega, df=df)


def lr1_statistic(g, h):
    """
    ``LR1 / (n - k)`` for ``H0: beta = beta0``.

    Equal to ``b0'gp b0 / b0'gm b0`` minus the smallest root of
    ``det(gp - x gm) = 0``, which needs no square root of the variance
    estimate. The difference is evaluated in the eigenbasis of the pencil so
    that values near zero keep full relative accuracy.
    """
    if h.l != g.l:
        raise PreconditionError(f"beta0 has length {h.l} but the data have l={g.l}.")
    estimate_omega(g)
    return rayleigh_excess(g.gp, g.gm, h.b0)


def psi1(m):
    """``LR1 / (n - k)`` written as a function of the six inner products."""
    if not m.d4 > 0:
        raise NotPositiveDefinite("The residual block must be positive definite.")
    e1 = np.zeros(m.d2.shape[0] + 1)
    e1[0] = 1.0
    return rayleigh_excess(m.bar_block, m.tilde_block, e1)


def psi0(d1, d2, d3):
    """``LR0 = S'S - smallest eigenvalue of [[S'S, S'T], [T'S, T'T]]``."""
    d2 = np.atleast_1d(np.asarray(d2, dtype=float))
    d3 = np.atleast_2d(np.asarray(d3, dtype=float))
    if d2.shape[0] == 1:
        return float(psi0_l1(d1, d2[0], d3[0, 0]))
    e1 = np.zeros(d2.shape[0] + 1)
    e1[0] = 1.0
    return rayleigh_excess(_block(d1, d2, d3), np.eye(e1.shape[0]), e1)


def psi0_l1(d1, d2, d3):
    """Closed form of :func:`psi0` for one endogenous regressor, elementwise."""
    disc = (d1 - d3) ** 2 + 4.0 * d2 * d2
    return 0.5 * (d1 - d3 + np.sqrt(disc))


def psi1_l1(d1, d2, d3, d4, d5, d6):
    """
    Elementwise :func:`psi1` for one endogenous regressor.

    The smallest pencil root is taken in the cancellation-free form
    ``2c / (-b + sqrt(b^2 - 4ac))``, valid because ``b <= 0`` for PSD blocks.
    """
    a, b, c = pencil_coefficients((d1, d2, d3), (d4, d5, d6))
    s = np.sqrt(np.maximum(b * b - 4.0 * a * c, 0.0))
    denom = s - b
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.where(denom > 0, 2.0 * c / denom, 0.0)
    return np.maximum(d1 / d4 - root, 0.0)


def tau_hat(g, h):
    """
    Conditioning statistic ``T_hat'T_hat`` (an ``l x l`` matrix).

    Computed as ``(n-k) N A0'gm^-1 gp gm^-1 A0 N`` with
    ``N = (A0'gm^-1 A0)^{-1/2}``.
    """
    A0 = h.A0
    try:
        GinvA = np.linalg.solve(g.gm, A0)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Y'M_Z Y is singular.") from exc
    N = sym_inv_sqrt(A0.T @ GinvA)
    out = (g.n - g.k) * N @ GinvA.T @ g.gp @ GinvA @ N
    return 0.5 * (out + out.T)


def oracle_bar_stats(data, h, omega, Q=None):
    """
    Standardised ``S_bar`` and ``T_bar`` for a known error variance ``omega``.

    The instrument rotation ``(Z'Z)^{-1/2} Z'`` is replaced by ``Q'`` from a
    thin QR; the two differ by an orthogonal ``k x k`` rotation, which leaves
    every inner product unchanged.
    """
    data = partial_out(data)
    if Q is None:
        Q = thin_qr(data.Z)
    QY = Q.T @ data.Y
    return _standardise(QY, h, omega)


def oracle_tilde_stats(data, h, omega, Q=None):
    """Residual analogues ``S_tilde = M_Z Y b0 (b0'omega b0)^{-1/2}`` and ``T_tilde``."""
    data = partial_out(data)
    if Q is None:
        Q = thin_qr(data.Z)
    _, resid = project(Q, data.Y)
    return _standardise(resid, h, omega)


def _standardise(M, h, omega):
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    b0, A0 = h.b0, h.A0
    scale = b0 @ omega @ b0
    if not scale > 0:
        raise NotPositiveDefinite("omega must be positive definite.")
    try:
        OinvA = np.linalg.solve(omega, A0)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("omega is singular.") from exc
    s = M @ b0 / np.sqrt(scale)
    t = M @ OinvA @ sym_inv_sqrt(A0.T @ OinvA)
    return s, t


def six_moments(data, h, omega, Q=None):
    """Six inner products built from the known-variance oracle statistics."""
    data = partial_out(data)
    if Q is None:
        Q = thin_qr(data.Z)
    sbar, tbar = oracle_bar_stats(data, h, omega, Q)
    stil, ttil = oracle_tilde_stats(data, h, omega, Q)
    return SixMoments(
        d1=sbar @ sbar, d2=sbar @ tbar, d3=tbar.T @ tbar,
        d4=stil @ stil, d5=stil @ ttil, d6=ttil.T @ ttil,
        n=data.n_eff, k=data.k,
    )


def leverage_diag(Q):
    """Balanced-design diagnostic ``(1/k) sum_i P_ii^2`` with ``P_ii = ||Q_i||^2``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p_ii = np.einsum("ij,ij->i", Q, Q)
    return float(p_ii @ p_ii / Q.shape[1])
