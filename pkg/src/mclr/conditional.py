"""Conditional critical values and test decisions.

Critical values are returned on the ``LR1`` scale, i.e. ``(n - k)`` times the
``(1 - alpha)`` quantile of ``psi1`` for the MCLR test, and the quantile of
``psi0`` for the conventional CLR test. Both decisions therefore compare the
unscaled ``LR1`` statistic against their critical value.

For one endogenous regressor the conditional law is sampled through the
tau-free components ``(z, r, W)``: ``S't = sqrt(tau) z``,
``S'S = z^2 + r`` with ``r ~ chi2(k - 1)`` and ``W ~ Wishart(n - k, I_2)``.
A single draw set therefore serves every ``tau``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .exceptions import InvalidDim, PreconditionError
from .linalg import gen_eig_smallest, sym_sqrt_psd, thin_qr
from .rng import StreamBatch
from .statistics import (
    SixMoments,
    gram_pair,
    lr1_statistic,
    oracle_bar_stats,
    partial_out,
    psi0,
    psi0_l1,
    psi1_l1,
    tau_hat,
)

_CHUNK = 4096


@dataclass(frozen=True)
class MCConfig:
    """
    Monte-Carlo settings for one critical value.

    ``threads`` only splits the replication loop; results never depend on it.
    """

    reps: int = 10_000
    alpha: float = 0.05
    master_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if int(self.reps) < 100:
            raise PreconditionError(f"reps must be at least 100, got {self.reps}.")
        if not 0.0 < self.alpha < 1.0:
            raise PreconditionError(f"alpha must lie in (0, 1), got {self.alpha}.")
        if int(self.threads) < 1:
            raise PreconditionError(f"threads must be positive, got {self.threads}.")

    @property
    def rank(self):
        """1-based index of the order statistic used as critical value."""
        return order_rank(self.reps, self.alpha)

    def with_seed(self, seed):
        return MCConfig(self.reps, self.alpha, seed, self.threads)


@dataclass(frozen=True)
class TestDecision:
    statistic: float
    critical_value: float
    pvalue: float
    reject: bool
    alpha: float
    reps: int
    master_seed: int
    conditioning_tau: np.ndarray
    test: str = "mclr"
    n: int = 0
    k: int = 0

    __test__ = False


@dataclass(frozen=True)
class ComponentDraws:
    """Tau-free conditional draws for one endogenous regressor."""

    z: np.ndarray
    r: np.ndarray
    w11: np.ndarray
    w12: np.ndarray
    w22: np.ndarray
    n: int
    k: int
    seed: int = field(default=0, repr=False)

    def __len__(self):
        return self.z.shape[0]

    def psi1(self, tau):
        """``psi1`` at conditioning value ``tau`` for every draw."""
        tau = float(tau)
        return psi1_l1(self.z * self.z + self.r, math.sqrt(tau) * self.z, tau, self.w11, self.w12, self.w22)

    def psi0(self, tau):
        tau = float(tau)
        return psi0_l1(self.z * self.z + self.r, math.sqrt(tau) * self.z, tau)


def order_rank(reps, alpha):
    """``ceil((1 - alpha) B)`` computed without floating-point overshoot."""
    rank = math.ceil(round((1.0 - alpha) * reps, 9))
    return min(max(rank, 1), reps)


def order_statistic(values, alpha):
    """The ``ceil((1 - alpha) B)``-th smallest of ``B`` values."""
    values = np.asarray(values)
    rank = order_rank(values.shape[0], alpha)
    return float(np.partition(values, rank - 1)[rank - 1])


def mc_pvalue(values, statistic):
    """Add-one Monte-Carlo p-value ``(1 + #{draws >= statistic}) / (B + 1)``."""
    values = np.asarray(values)
    return (1.0 + np.count_nonzero(values >= statistic)) / (values.shape[0] + 1.0)


def _check_dims(n, k, l=1):
    if k < l:
        raise InvalidDim(f"Need k >= l, got k={k}, l={l}.")
    if n <= k + l:
        raise PreconditionError(f"Need n > k + l, got n={n}, k={k}, l={l}.")


def draw_components(n, k, cfg):
    """Draw set of ``cfg.reps`` replications, stream ``i`` for replication ``i``."""
    n, k = int(n), int(k)
    _check_dims(n, k)
    reps = int(cfg.reps)
    seed = int(cfg.master_seed) & 0xFFFFFFFFFFFFFFFF
    starts = list(range(0, reps, _CHUNK))

    def run(start):
        return _core.draw_components(seed, start, min(_CHUNK, reps - start), n, k)

    if cfg.threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=int(cfg.threads)) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    cols = [np.concatenate([p[j] for p in parts]) for j in range(5)]
    return ComponentDraws(*cols, n=n, k=k, seed=seed)


def draw_conditional_components(stream, n, k, l, tau):
    """
    One draw of the six inner products given ``T't = tau``.

    Draw order on the stream: ``l`` normals ``z``, then ``chi2(k - l)`` when
    ``k > l``, then the Bartlett factor of ``Wishart(n - k, I_{l+1})``.
    """
    n, k, l = int(n), int(k), int(l)
    _check_dims(n, k, l)
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    if tau.shape != (l, l):
        raise InvalidDim(f"tau must be {l} x {l}, got shape {tau.shape}.")
    batch = StreamBatch(stream.master_seed, [stream.stream_id], stream.block)
    m = _general_draws(batch, n, k, l, tau)
    stream.block = int(batch.counter[0])
    d1, d2, d3, W = m
    return SixMoments(
        d1=d1[0], d2=d2[0], d3=d3, d4=W[0, 0, 0], d5=W[0, 0, 1:], d6=W[0, 1:, 1:], n=n, k=k
    )


def _general_draws(batch, n, k, l, tau):
    z = np.column_stack([batch.normal() for _ in range(l)])
    r = batch.chi_square(k - l) if k > l else np.zeros(len(batch))
    W = batch.wishart_identity(n - k, l + 1)
    root = sym_sqrt_psd(tau)
    return np.einsum("ij,ij->i", z, z) + r, z @ root, tau, W


def _general_psi1_values(n, k, l, tau, cfg):
    batch = StreamBatch(cfg.master_seed, np.arange(int(cfg.reps), dtype=np.uint64))
    d1, d2, d3, W = _general_draws(batch, n, k, l, tau)
    out = np.empty(len(batch))
    for i in range(len(batch)):
        bar = np.empty((l + 1, l + 1))
        bar[0, 0], bar[0, 1:], bar[1:, 0], bar[1:, 1:] = d1[i], d2[i], d2[i], d3
        out[i] = max(d1[i] / W[i, 0, 0] - gen_eig_smallest(bar, W[i]), 0.0)
    return out


def _general_psi0_values(k, l, tau, cfg):
    batch = StreamBatch(cfg.master_seed, np.arange(int(cfg.reps), dtype=np.uint64))
    z = np.column_stack([batch.normal() for _ in range(l)])
    r = batch.chi_square(k - l) if k > l else np.zeros(len(batch))
    d2 = z @ sym_sqrt_psd(tau)
    d1 = np.einsum("ij,ij->i", z, z) + r
    return np.array([psi0(d1[i], d2[i], tau) for i in range(len(batch))])


def _as_tau(tau, l):
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    if tau.shape != (l, l):
        raise InvalidDim(f"tau must be {l} x {l}, got shape {tau.shape}.")
    if np.linalg.eigvalsh(0.5 * (tau + tau.T))[0] < -1e-10 * max(1.0, np.abs(tau).max()):
        raise PreconditionError("tau must be positive semi-definite.")
    return tau


def mclr_null_values(n, k, l, tau, cfg, draws=None):
    """Null draws of ``LR1`` (that is ``(n - k) psi1``) given the conditioning value."""
    n, k, l = int(n), int(k), int(l)
    tau = _as_tau(tau, l)
    if l == 1:
        if draws is None:
            draws = draw_components(n, k, cfg)
        return (n - k) * draws.psi1(max(tau[0, 0], 0.0))
    _check_dims(n, k, l)
    return (n - k) * _general_psi1_values(n, k, l, tau, cfg)


def clr_null_values(k, l, tau, cfg, draws=None, n=None):
    """Null draws of ``LR0`` given ``T't = tau`` (conventional critical value function)."""
    k, l = int(k), int(l)
    if k < l:
        raise InvalidDim(f"Need k >= l, got k={k}, l={l}.")
    tau = _as_tau(tau, l)
    if l == 1:
        if draws is None:
            # only (z, r) are used; any df for the Wishart block gives the same prefix
            draws = draw_components(n if n is not None else k + 3, k, cfg)
        return draws.psi0(max(tau[0, 0], 0.0))
    return _general_psi0_values(k, l, tau, cfg)


def critval_mclr(n, k, l, tau, cfg, draws=None):
    """MCLR critical value on the ``LR1`` scale."""
    return order_statistic(mclr_null_values(n, k, l, tau, cfg, draws), cfg.alpha)


def critval_clr(k, l, tau, cfg, draws=None):
    """Conventional CLR critical value ``c0`` (``LR1`` scale)."""
    return order_statistic(clr_null_values(k, l, tau, cfg, draws), cfg.alpha)


def _decide(stat, null_values, cfg, tau, name, n, k):
    crit = order_statistic(null_values, cfg.alpha)
    return TestDecision(
        statistic=float(stat),
        critical_value=crit,
        pvalue=mc_pvalue(null_values, stat),
        reject=bool(stat >= crit),
        alpha=cfg.alpha,
        reps=int(cfg.reps),
        master_seed=int(cfg.master_seed),
        conditioning_tau=np.atleast_2d(tau),
        test=name,
        n=n,
        k=k,
    )


def _prepare(data, h):
    data = partial_out(data)
    if h.l != data.l:
        raise PreconditionError(f"beta0 has length {h.l} but the data have l={data.l}.")
    Q = thin_qr(data.Z)
    g = gram_pair(data, Q)
    return data, Q, g


def mclr_test(data, h, cfg, draws=None):
    """
    MCLR test: reject when ``LR1 >= (n - k) c1(T_hat)``.

    Equivalent to comparing ``LR1 / (n - k)`` with the ``psi1`` quantile.
    """
    data, _, g = _prepare(data, h)
    stat = (g.n - g.k) * lr1_statistic(g, h)
    tau = tau_hat(g, h)
    null = mclr_null_values(g.n, g.k, g.l, tau, cfg, draws)
    return _decide(stat, null, cfg, tau, "mclr", g.n, g.k)


def clr_test_conventional(data, h, cfg, draws=None):
    """Conventional CLR test with plug-in variance: reject when ``LR1 >= c0(T_hat)``."""
    data, _, g = _prepare(data, h)
    stat = (g.n - g.k) * lr1_statistic(g, h)
    tau = tau_hat(g, h)
    null = clr_null_values(g.k, g.l, tau, cfg, draws, n=g.n)
    return _decide(stat, null, cfg, tau, "clr", g.n, g.k)


def oracle_mclr_test(data, h, omega, cfg, draws=None):
    """Infeasible MCLR test conditioning on the true ``T_bar'T_bar`` (known ``omega``)."""
    data, Q, g = _prepare(data, h)
    stat = (g.n - g.k) * lr1_statistic(g, h)
    _, tbar = oracle_bar_stats(data, h, omega, Q)
    tau = tbar.T @ tbar
    null = mclr_null_values(g.n, g.k, g.l, tau, cfg, draws)
    return _decide(stat, null, cfg, tau, "mclr-oracle", g.n, g.k)
