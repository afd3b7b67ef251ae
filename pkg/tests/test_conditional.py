import numpy as np
import pytest
from scipy import stats

from mclr.conditional import (
    MCConfig,
    TestDecision,
    _general_psi1_values,
    clr_null_values,
    clr_test_conventional,
    critval_clr,
    critval_mclr,
    draw_components,
    draw_conditional_components,
    mc_pvalue,
    mclr_null_values,
    mclr_test,
    oracle_mclr_test,
    order_rank,
    order_statistic,
)
from mclr.exceptions import InvalidDim, PreconditionError
from mclr.rng import SeededStream
from mclr.simulation import tabulate_critvals
from mclr.statistics import Hypothesis, IVData

from conftest import make_iv

CFG = MCConfig(reps=10_000, alpha=0.05, master_seed=0)
TAUS = [1, 5, 10, 20, 50, 75, 100]
KS = [1, 2, 3, 4, 5, 10, 20, 50]


@pytest.mark.parametrize("reps,alpha,rank", [(10_000, 0.05, 9500), (1999, 0.05, 1900), (100, 0.1, 90), (101, 0.05, 96)])
def test_order_rank(reps, alpha, rank):
    assert order_rank(reps, alpha) == rank


def test_order_statistic_and_pvalue():
    values = np.arange(1.0, 101.0)
    assert order_statistic(values, 0.05) == 95.0
    assert mc_pvalue(values, 95.0) == pytest.approx(7 / 101)
    assert mc_pvalue(values, 1000.0) == pytest.approx(1 / 101)


def test_mcconfig_validation():
    with pytest.raises(PreconditionError):
        MCConfig(reps=10)
    with pytest.raises(PreconditionError):
        MCConfig(alpha=1.5)
    with pytest.raises(PreconditionError):
        MCConfig(threads=0)
    assert CFG.rank == 9500


@pytest.mark.parametrize("tau", [0.0, 1.0, 50.0, 5e4])
def test_mclr_k1_is_f_quantile_for_any_tau(tau):
    # with k = 1 the statistic reduces to (n - k) chi2(1) / chi2(n - k)
    assert critval_mclr(100, 1, 1, tau, CFG) == pytest.approx(3.93, abs=0.10)
    assert stats.f(1, 99).ppf(0.95) == pytest.approx(3.937, abs=1e-3)


def test_mclr_table_cells():
    assert critval_mclr(100, 5, 1, 1.0, CFG) == pytest.approx(10.75, abs=0.35)
    assert critval_mclr(100, 50, 1, 100.0, CFG) == pytest.approx(12.84, abs=0.6)


def test_clr_table_cells():
    assert critval_clr(1, 1, 3.0, CFG) == pytest.approx(stats.chi2(1).ppf(0.95), abs=0.08)
    assert critval_clr(5, 1, 1.0, CFG) == pytest.approx(10.29, abs=0.35)
    for k in (2, 10, 50):
        assert critval_clr(k, 1, 5e4, CFG) == pytest.approx(3.84, abs=0.10)


def test_clr_tau_zero_is_chi_square_k():
    assert critval_clr(6, 1, 0.0, CFG) == pytest.approx(stats.chi2(6).ppf(0.95), rel=0.03)


def test_monotone_in_tau_with_shared_draws():
    table = tabulate_critvals(100, KS, TAUS, 0.05, CFG, "mclr")
    assert np.all(np.diff(table, axis=0) <= 1e-9)
    table = tabulate_critvals(100, KS, TAUS, 0.05, CFG, "clr")
    assert np.all(np.diff(table, axis=0) <= 1e-9)


def test_mclr_dominates_clr_on_grid():
    a = tabulate_critvals(100, KS, TAUS, 0.05, CFG, "mclr")
    b = tabulate_critvals(100, KS, TAUS, 0.05, CFG, "clr")
    assert np.all(a > b)


def test_draws_independent_of_threads():
    one = draw_components(80, 7, MCConfig(reps=9000, master_seed=3, threads=1))
    four = draw_components(80, 7, MCConfig(reps=9000, master_seed=3, threads=4))
    for name in ("z", "r", "w11", "w12", "w22"):
        np.testing.assert_array_equal(getattr(one, name), getattr(four, name))


def test_draws_are_prefix_stable():
    small = draw_components(50, 4, MCConfig(reps=500, master_seed=9))
    big = draw_components(50, 4, MCConfig(reps=5000, master_seed=9))
    np.testing.assert_array_equal(small.z, big.z[:500])
    np.testing.assert_array_equal(small.w22, big.w22[:500])


def test_general_path_matches_shortcut_for_one_regressor():
    cfg = MCConfig(reps=300, master_seed=5)
    general = _general_psi1_values(40, 6, 1, np.array([[7.0]]), cfg)
    shortcut = draw_components(40, 6, cfg).psi1(7.0)
    np.testing.assert_allclose(general, shortcut, rtol=1e-9, atol=1e-12)


def test_conditional_components_degenerate_tau():
    d1 = []
    for i in range(4000):
        m = draw_conditional_components(SeededStream(1, i), 50, 6, 1, 0.0)
        assert m.d2[0] == 0.0
        d1.append(m.d1)
    assert stats.kstest(d1, stats.chi2(6).cdf).pvalue > 1e-3


def test_conditional_components_d2_variance():
    d2 = draw_components(50, 4, MCConfig(reps=100_000, master_seed=2)).z * np.sqrt(5.0)
    assert d2.var() == pytest.approx(5.0, rel=0.02)


def test_d1_matches_brute_force_full_dimension():
    k, tau, B = 10, 5.0, 100_000
    draws = draw_components(60, k, MCConfig(reps=B, master_seed=4))
    rng = np.random.default_rng(12345)
    S = rng.standard_normal((B, k))
    t = np.zeros(k)
    t[0] = np.sqrt(tau)
    shortcut_d1 = draws.z**2 + draws.r
    assert stats.ks_2samp(shortcut_d1, np.einsum("ij,ij->i", S, S)).pvalue > 0.01
    assert stats.ks_2samp(np.sqrt(tau) * draws.z, S @ t).pvalue > 0.01


def test_conditional_components_two_regressors():
    tau = np.array([[4.0, 1.0], [1.0, 3.0]])
    m = draw_conditional_components(SeededStream(0, 0), 40, 5, 2, tau)
    assert m.d2.shape == (2,) and m.d6.shape == (2, 2)
    np.testing.assert_array_equal(m.d3, tau)
    with pytest.raises(InvalidDim):
        draw_conditional_components(SeededStream(0, 0), 40, 5, 2, np.eye(3))


def test_two_regressor_critical_values():
    cfg = MCConfig(reps=2000, master_seed=1)
    lo = critval_mclr(60, 5, 2, 100.0 * np.eye(2), cfg)
    hi = critval_mclr(60, 5, 2, 1.0 * np.eye(2), cfg)
    assert 0 < lo <= hi
    c0 = critval_clr(5, 2, 1e5 * np.eye(2), MCConfig(reps=20_000, master_seed=1))
    # strong identification: LR0 is approximately chi2(l); quantile SE is about 0.06 here
    assert c0 == pytest.approx(stats.chi2(2).ppf(0.95), abs=0.25)


def test_null_values_reject_non_psd_tau():
    with pytest.raises(PreconditionError):
        mclr_null_values(50, 5, 1, -1.0, CFG)
    with pytest.raises(InvalidDim):
        clr_null_values(1, 2, np.eye(2), CFG)


def test_zero_statistic_never_rejects():
    rng = np.random.default_rng(0)
    n, k = 40, 3
    Z = np.zeros((n, k))
    Z[:k] = np.eye(k)
    Y = rng.standard_normal((n, 2))
    Y[:k] = 0.0
    data = IVData(y1=Y[:, 0], Y2=Y[:, 1], Z=Z)
    for test in (mclr_test, clr_test_conventional):
        d = test(data, Hypothesis([0.0]), MCConfig(reps=1000, alpha=0.5))
        assert d.statistic == 0.0 and not d.reject


def test_decision_fields_and_pvalue_coherence():
    data = make_iv(100, 5, beta=0.6, seed=3)
    cfg = MCConfig(reps=1999, master_seed=11)
    B, r = cfg.reps, cfg.rank
    for b in np.linspace(-1, 2, 13):
        d = mclr_test(data, Hypothesis([b]), cfg)
        assert isinstance(d, TestDecision)
        assert d.reps == B and d.master_seed == 11 and d.alpha == 0.05 and d.test == "mclr"
        assert 0 < d.pvalue <= 1
        # with continuous null draws, stat >= r-th order statistic iff at most B - r + 1 draws are >= stat
        assert d.reject == (d.pvalue <= (B - r + 2) / (B + 1))


def test_decision_deterministic_and_draw_reuse():
    data = make_iv(80, 6, seed=4)
    h = Hypothesis([0.1])
    cfg = MCConfig(reps=2000, master_seed=42)
    a = mclr_test(data, h, cfg)
    b = mclr_test(data, h, cfg, draws=draw_components(80, 6, cfg))
    assert a == b or (a.statistic == b.statistic and a.critical_value == b.critical_value and a.pvalue == b.pvalue)
    c = mclr_test(data, h, MCConfig(reps=2000, master_seed=42, threads=3))
    assert c.critical_value == a.critical_value


def test_oracle_and_feasible_share_statistic():
    data = make_iv(80, 6, seed=5, rho=0.3)
    h = Hypothesis([0.0])
    cfg = MCConfig(reps=1000)
    omega = np.array([[1.0, 0.3], [0.3, 1.0]])
    o = oracle_mclr_test(data, h, omega, cfg)
    f = mclr_test(data, h, cfg)
    assert o.statistic == f.statistic
    assert o.test == "mclr-oracle"


def test_mclr_rejects_far_alternative():
    data = make_iv(200, 5, beta=1.0, strength=0.5, seed=6)
    assert mclr_test(data, Hypothesis([-2.0]), MCConfig(reps=1000)).reject


def test_beta_length_mismatch():
    with pytest.raises(PreconditionError):
        mclr_test(make_iv(40, 4, seed=7), Hypothesis([0.0, 0.0]), MCConfig(reps=200))
