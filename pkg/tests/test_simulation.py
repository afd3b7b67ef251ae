import numpy as np
import pytest

from mclr.conditional import MCConfig
from mclr.exceptions import InvalidDesign, PreconditionError
from mclr.rng import SeededStream
from mclr.simulation import (
    build_design,
    gen_sample,
    leverage_report,
    run_power,
    run_size,
    tabulate_critvals,
)


def test_design_calibration_identity():
    for n, k in ((100, 30), (200, 10), (60, 4)):
        d = build_design(n, k, 0.2, 30.0)
        assert d.pi2 @ d.Z.T @ d.Z @ d.pi2 == pytest.approx(30.0, rel=1e-8)


def test_design_structure_and_determinism():
    a = build_design(100, 10, 0.2, 10.0, design_seed=3)
    b = build_design(100, 10, 0.2, 10.0, design_seed=3)
    np.testing.assert_array_equal(a.Z, b.Z)
    assert np.all(a.Z[:, 0] == 1.0)
    np.testing.assert_allclose(a.Z[:, 2], a.Z[:, 1] ** 2)
    np.testing.assert_allclose(a.Z[:, 3], a.Z[:, 1] ** 3)
    assert not np.array_equal(a.Z, build_design(100, 10, 0.2, 10.0, design_seed=4).Z)
    assert a.direction == "equal"


def test_design_strength_scaling():
    weak = build_design(100, 30, 0.2, 2.0)
    strong = build_design(100, 30, 0.2, 30.0)
    np.testing.assert_allclose(weak.pi2 / strong.pi2, np.sqrt(2.0 / 30.0))


def test_random_direction_flag():
    d = build_design(100, 10, 0.2, 10.0, direction_seed=7)
    assert d.direction == "random:7"
    assert d.pi2 @ d.Z.T @ d.Z @ d.pi2 == pytest.approx(10.0)
    assert not np.allclose(d.pi2 / d.pi2[0], 1.0)


@pytest.mark.parametrize("args", [(100, 3, 0.2, 10.0), (10, 9, 0.2, 10.0), (100, 10, 1.0, 10.0), (100, 10, 0.2, 0.0)])
def test_design_guards(args):
    with pytest.raises(InvalidDesign):
        build_design(*args)


def test_omega_of_beta():
    d = build_design(50, 5, 0.6, 10.0)
    np.testing.assert_allclose(d.omega(0.0), [[1.0, 0.6], [0.6, 1.0]])
    # Var(y1) = Var(beta v2 + u) = beta^2 + 2 rho beta + 1
    np.testing.assert_allclose(d.omega(2.0), [[1 + 2.4 + 4, 2.6], [2.6, 1.0]])


@pytest.mark.parametrize("rho", [0.0, 0.6])
def test_sample_error_correlation(rho):
    d = build_design(100_000, 4, rho, 10.0)
    data = gen_sample(d, 0.0, SeededStream(1, 0))
    u = data.y1
    v2 = data.Y2[:, 0] - d.Z @ d.pi2
    assert np.corrcoef(u, v2)[0, 1] == pytest.approx(rho, abs=0.01)
    assert u.var() == pytest.approx(1.0, abs=0.02)


def test_sample_structural_equation():
    d = build_design(50, 5, 0.3, 10.0)
    s1, s2 = SeededStream(2, 5), SeededStream(2, 5)
    a, b = gen_sample(d, 0.0, s1), gen_sample(d, 1.5, s2)
    # same errors, so y1(beta) - beta * y2 recovers u
    np.testing.assert_allclose(b.y1 - 1.5 * b.Y2[:, 0], a.y1, atol=1e-12)
    assert s1.block == 100


def test_run_size_threads_identical():
    d = build_design(100, 10, 0.2, 10.0)
    cfg = MCConfig(reps=199, master_seed=3)
    one = run_size(d, ["mclr", "clr", "mclr-oracle"], 60, cfg)
    four = run_size(d, ["mclr", "clr", "mclr-oracle"], 60, MCConfig(reps=199, master_seed=3, threads=4))
    assert one == four
    assert [r.test for r in one] == ["mclr", "clr", "mclr-oracle"]
    for r in one:
        assert 0.0 <= r.rejection_rate <= 1.0
        assert r.mc_se == pytest.approx(np.sqrt(r.rejection_rate * (1 - r.rejection_rate) / 60))


def test_run_size_rejects_unknown_test():
    d = build_design(60, 5, 0.2, 10.0)
    with pytest.raises(PreconditionError):
        run_size(d, ["wald"], 10, MCConfig(reps=100))


def test_run_power_small():
    d = build_design(200, 10, 0.2, 20.0)
    grid = [-1.0, 0.0, 1.0]
    curve = run_power(d, grid, ["mclr"], 200, 100, MCConfig(reps=199, master_seed=1))
    r = curve.rates["mclr"]
    assert r.shape == (3,)
    assert r[0] > r[1] and r[2] > r[1]
    assert 0.0 < curve.critical_values["mclr"] < 1.0
    np.testing.assert_allclose(curve.mc_se("mclr"), np.sqrt(r * (1 - r) / 100))


@pytest.mark.parametrize("grid", [[-1.0, 1.0], [0.0, -1.0], [[0.0]]])
def test_run_power_grid_guards(grid):
    d = build_design(60, 5, 0.2, 10.0)
    with pytest.raises(PreconditionError):
        run_power(d, grid, ["mclr"], 10, 10, MCConfig(reps=100))


def test_tabulate_shape_and_guard():
    t = tabulate_critvals(100, [1, 5], [1.0, 10.0, 100.0], 0.05, MCConfig(reps=500))
    assert t.shape == (3, 2)
    with pytest.raises(PreconditionError):
        tabulate_critvals(100, [1], [1.0], 0.05, MCConfig(reps=500), which="ar")


def test_leverage_report():
    d = build_design(100, 30, 0.2, 10.0)
    ratio, lev = leverage_report(d.Z)
    assert ratio == pytest.approx(0.3)
    assert 0.09 < lev < 1.0
