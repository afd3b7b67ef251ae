"""Monte-Carlo experiments: Staiger-Stock design, size tables, calibrated power.

Seeds
    Every random quantity is tied to a derived seed so experiments are
    reproducible and independent of execution order:

    * the fixed instrument matrix uses ``design_seed`` (stream 0);
    * the errors of replication ``r`` use stream ``r`` under
      ``derive_seed(master, TAG_SAMPLE, phase)``;
    * the critical-value draws of replication ``r`` use
      ``derive_seed(master, TAG_CRIT, phase * 2**32 + r)``, shared by all
      tests evaluated on that replication.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conditional import (
    MCConfig,
    clr_test_conventional,
    draw_components,
    mclr_test,
    oracle_mclr_test,
    order_statistic,
)
from .exceptions import InvalidDesign, PreconditionError
from .linalg import thin_qr
from .rng import SeededStream, derive_seed
from . import _core
from .statistics import Hypothesis, IVData

TAG_SAMPLE = 1
TAG_CRIT = 2
TESTS = ("mclr", "clr", "mclr-oracle")
PRESET_DELTA2 = {"very weak": 2.0, "weak": 10.0, "strong": 30.0}
DEFAULT_DELTA_GRID = tuple(np.round(np.linspace(-1.0, 1.0, 41), 10))


@dataclass(frozen=True)
class StaigerStockDesign:
    """
    Fixed-instrument design with one endogenous regressor.

    ``Z = [1, z, z^2, z^3, e_1 .. e_{k-4}]`` with standard normal ``z`` and
    ``e_j`` drawn once; ``pi2`` is scaled so that ``pi2'Z'Z pi2 = delta2``.
    """

    n: int
    k: int
    rho: float
    delta2: float
    beta0: float
    Z: np.ndarray = field(repr=False)
    pi2: np.ndarray = field(repr=False)
    design_seed: int = 0
    direction: str = "equal"

    def omega(self, beta):
        """Reduced-form error covariance at structural coefficient ``beta``."""
        r = self.rho
        return np.array([[1.0 + 2.0 * r * beta + beta * beta, r + beta], [r + beta, 1.0]])

    def summary(self):
        return {
            "n": self.n, "k": self.k, "rho": self.rho, "delta2": self.delta2,
            "beta0": self.beta0, "design_seed": self.design_seed, "direction": self.direction,
        }


@dataclass(frozen=True)
class SizeResult:
    design: dict
    test: str
    reps: int
    rejection_rate: float
    mc_se: float


@dataclass(frozen=True)
class PowerCurve:
    delta_grid: np.ndarray
    rates: dict
    critical_values: dict
    power_reps: int
    calib_reps: int
    design: dict

    def mc_se(self, test):
        r = self.rates[test]
        return np.sqrt(r * (1.0 - r) / self.power_reps)


def build_design(n, k, rho, delta2, beta0=0.0, design_seed=0, direction_seed=None):
    """
    Draw and freeze the instrument matrix, then calibrate ``pi2``.

    ``direction_seed`` replaces the equal-weights direction of ``pi2`` by a
    random unit vector.
    """
    n, k = int(n), int(k)
    if k < 4:
        raise InvalidDesign(f"The design needs k >= 4 instruments, got k={k}.")
    if n <= k + 1:
        raise InvalidDesign(f"Need n > k + 1, got n={n}, k={k}.")
    if not -1.0 < rho < 1.0:
        raise InvalidDesign(f"rho must lie in (-1, 1), got {rho}.")
    if not delta2 > 0:
        raise InvalidDesign(f"delta2 must be positive, got {delta2}.")
    draws = SeededStream(design_seed, 0).normals((n, k - 3))
    z = draws[:, 0]
    Z = np.column_stack([np.ones(n), z, z**2, z**3, draws[:, 1:]])
    if direction_seed is None:
        u = np.full(k, 1.0 / math.sqrt(k))
        direction = "equal"
    else:
        u = SeededStream(direction_seed, 1).normals(k)
        u /= np.linalg.norm(u)
        direction = f"random:{direction_seed}"
    Zu = Z @ u
    pi2 = math.sqrt(delta2 / (Zu @ Zu)) * u
    Z.setflags(write=False)
    pi2.setflags(write=False)
    return StaigerStockDesign(
        n=n, k=k, rho=float(rho), delta2=float(delta2), beta0=float(beta0),
        Z=Z, pi2=pi2, design_seed=int(design_seed), direction=direction,
    )


def gen_sample(design, beta, stream):
    """One sample: unit-variance errors ``(u, v2)`` with correlation ``rho``."""
    n = design.n
    e = _core.stream_normals(stream.master_seed, stream.stream_id, stream.block, 2 * n).reshape(n, 2)
    stream.block += 2 * n
    u = e[:, 0]
    v2 = design.rho * u + math.sqrt(1.0 - design.rho**2) * e[:, 1]
    y2 = design.Z @ design.pi2 + v2
    y1 = y2 * beta + u
    return IVData(y1=y1, Y2=y2[:, None], Z=design.Z)


def _crit_seed(master, phase, rep):
    return derive_seed(master, TAG_CRIT, (int(phase) << 32) + int(rep))


def _replicate(design, beta, tests, cfg, phase, rep):
    stream = SeededStream(derive_seed(cfg.master_seed, TAG_SAMPLE, phase), rep)
    data = gen_sample(design, beta, stream)
    h = Hypothesis([design.beta0])
    sub = MCConfig(cfg.reps, cfg.alpha, _crit_seed(cfg.master_seed, phase, rep), threads=1)
    draws = draw_components(design.n, design.k, sub)
    out = {}
    for name in tests:
        if name == "mclr":
            out[name] = mclr_test(data, h, sub, draws)
        elif name == "clr":
            out[name] = clr_test_conventional(data, h, sub, draws)
        elif name == "mclr-oracle":
            out[name] = oracle_mclr_test(data, h, design.omega(beta), sub, draws)
        else:
            raise PreconditionError(f"Unknown test {name!r}; choose from {TESTS}.")
    return out


def _run_reps(design, beta, tests, reps, cfg, phase):
    def run(r):
        return _replicate(design, beta, tests, cfg, phase, r)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=int(cfg.threads)) as pool:
            return list(pool.map(run, range(reps)))
    return [run(r) for r in range(reps)]


def _check_tests(tests):
    tests = tuple(tests)
    bad = [t for t in tests if t not in TESTS]
    if bad or not tests:
        raise PreconditionError(f"Unknown tests {bad}; choose from {TESTS}.")
    return tests


def run_size(design, tests, reps, cfg):
    """
    Null rejection frequencies at ``beta = beta0``.

    ``cfg`` fixes the number of critical-value draws, the level and the
    master seed; every replication gets its own derived draw seed.
    """
    tests = _check_tests(tests)
    reps = int(reps)
    if reps < 1:
        raise PreconditionError("reps must be positive.")
    results = _run_reps(design, design.beta0, tests, reps, cfg, phase=0)
    out = []
    for name in tests:
        rate = sum(res[name].reject for res in results) / reps
        out.append(SizeResult(design.summary(), name, reps, rate, math.sqrt(rate * (1 - rate) / reps)))
    return out


def run_power(design, delta_grid, tests, calib_reps, power_reps, cfg):
    """
    Size-calibrated power curves.

    The calibration statistic of a conditional test is ``1 - p`` with ``p``
    its Monte-Carlo p-value; phase 1 sets each test's critical value to the
    ``(1 - alpha)`` order statistic of that quantity under the null, phase 2
    counts ``1 - p >= critical value`` at ``beta = beta0 + delta``. Errors and
    draw seeds are shared across the grid.
    """
    tests = _check_tests(tests)
    grid = np.asarray(delta_grid, dtype=float)
    if grid.ndim != 1 or not np.all(np.diff(grid) > 0):
        raise PreconditionError("delta grid must be strictly increasing.")
    if not np.any(grid == 0.0):
        raise PreconditionError("delta grid must contain 0.")
    null = _run_reps(design, design.beta0, tests, int(calib_reps), cfg, phase=1)
    crit = {
        name: order_statistic(np.array([1.0 - res[name].pvalue for res in null]), cfg.alpha)
        for name in tests
    }
    rates = {name: np.empty(grid.shape[0]) for name in tests}
    for j, delta in enumerate(grid):
        res = _run_reps(design, design.beta0 + float(delta), tests, int(power_reps), cfg, phase=2)
        for name in tests:
            rates[name][j] = np.mean([1.0 - r[name].pvalue >= crit[name] for r in res])
    return PowerCurve(
        delta_grid=grid, rates=rates, critical_values=crit,
        power_reps=int(power_reps), calib_reps=int(calib_reps), design=design.summary(),
    )


def tabulate_critvals(n, k_list, tau_list, alpha, cfg, which="mclr"):
    """
    Critical-value table, rows ``tau`` and columns ``k``.

    Each column reuses one draw set for all ``tau`` values, which keeps the
    columns smooth and monotone in ``tau``.
    """
    which = which.lower()
    if which not in ("mclr", "clr"):
        raise PreconditionError(f"which must be 'mclr' or 'clr', got {which!r}.")
    cfg = MCConfig(cfg.reps, alpha, cfg.master_seed, cfg.threads)
    table = np.empty((len(tau_list), len(k_list)))
    for j, k in enumerate(k_list):
        draws = draw_components(n, k, cfg)
        for i, tau in enumerate(tau_list):
            if which == "mclr":
                values = (n - k) * draws.psi1(tau)
            else:
                values = draws.psi0(tau)
            table[i, j] = order_statistic(values, alpha)
    return table


def leverage_report(Z):
    """``(k/n, (1/k) sum P_ii^2)`` for an instrument matrix."""
    from .statistics import leverage_diag

    Z = np.asarray(Z, dtype=float)
    return Z.shape[1] / Z.shape[0], leverage_diag(thin_qr(Z))
