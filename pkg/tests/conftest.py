import sys

import numpy as np
import pytest

from mclr.statistics import IVData


def make_iv(n, k, l=1, beta=None, strength=0.3, rho=0.5, seed=0, p=0):
    """Gaussian IV sample with correlated errors; ``p`` exogenous controls."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, k))
    W = rng.standard_normal((n, p)) if p else None
    beta = np.zeros(l) if beta is None else np.atleast_1d(beta)
    cov = np.full((l + 1, l + 1), rho)
    np.fill_diagonal(cov, 1.0)
    e = rng.multivariate_normal(np.zeros(l + 1), cov, size=n)
    Y2 = Z @ np.full((k, l), strength) + e[:, 1:]
    y1 = Y2 @ beta + e[:, 0]
    if W is not None:
        y1 = y1 + W @ np.ones(p)
        Y2 = Y2 + W @ np.ones((p, l))
    return IVData(y1=y1, Y2=Y2, Z=Z, W=W)


def write_iv_csv(path, data, fmt="{:.17g}"):
    cols = ["y"] + [f"y2_{j + 1}" for j in range(data.l)] + [f"z_{j + 1}" for j in range(data.k)]
    blocks = [data.y1[:, None], data.Y2, data.Z]
    if data.W is not None:
        cols += [f"w_{j + 1}" for j in range(data.W.shape[1])]
        blocks.append(data.W)
    values = np.hstack(blocks)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in values:
            fh.write(",".join(fmt.format(v) for v in row) + "\n")
    return path


@pytest.fixture
def iv_factory():
    return make_iv


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
