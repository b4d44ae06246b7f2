import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from qreliability import fpt as F
from qreliability.closedform import hazard_analytic, reliability_analytic
from qreliability.core import ModelParams
from qreliability.exceptions import EmptySample, ValidationError

from conftest import REFERENCE_SETS, UNDERDAMPED


def test_config_validation():
    for kw in (dict(dt=0.0, n_shots=10), dict(dt=0.1, n_shots=0), dict(dt=0.1, n_shots=1.5),
               dict(dt=0.1, n_shots=10, seed=-1), dict(dt=0.1, n_shots=10, t_max=0.05)):
        with pytest.raises(ValidationError):
            F.MonitoringConfig(**kw)
    with pytest.raises(ValidationError):
        F.MonitoringConfig(0.1, 10).n_bins()


def test_default_horizon():
    cfg = F.MonitoringConfig(0.1, 10).resolved(UNDERDAMPED)
    K = cfg.n_bins()
    assert reliability_analytic(UNDERDAMPED, cfg.t_max) < 1e-6
    assert reliability_analytic(UNDERDAMPED, cfg.dt * (K - 1)) >= 1e-6


def test_first_bin_probability():
    cfg = F.MonitoringConfig(0.1, 1, t_max=5.0)
    pk = F.bin_probabilities(UNDERDAMPED, cfg)
    assert pk[0] == pytest.approx(1 - reliability_analytic(UNDERDAMPED, 0.1), rel=1e-12)
    assert pk.shape == (50,)


@pytest.mark.parametrize("p", REFERENCE_SETS)
def test_product_identity(p):
    cfg = F.MonitoringConfig(0.1, 1, t_max=20.0)
    pk = F.bin_probabilities(p, cfg)
    R = reliability_analytic(p, cfg.times())
    np.testing.assert_allclose(np.cumprod(1 - pk), R[1:], rtol=1e-12, atol=1e-300)
    assert np.all((pk >= 0) & (pk <= 1))


def test_small_dt_limit():
    cfg = F.MonitoringConfig(1e-4, 1, t_max=10.0)
    pk = F.bin_probabilities(UNDERDAMPED, cfg)
    t = cfg.times()[:-1]
    h = hazard_analytic(UNDERDAMPED, t)
    sel = t >= 0.5  # away from h(0) = 0 where the relative error is undefined
    np.testing.assert_allclose(pk[sel] / cfg.dt, h[sel], rtol=1e-3)


def test_uniform_damping_late_bins():
    cfg = F.MonitoringConfig(0.1, 1, t_max=40.0)
    pk = F.bin_probabilities(ModelParams(0.3, 1.0, 1.0), cfg)
    assert pk[-1] == pytest.approx(-math.expm1(-0.1), rel=1e-9)


def test_forced_uniforms_bin_one():
    cfg = F.MonitoringConfig(0.1, 100, t_max=5.0)
    R1 = reliability_analytic(UNDERDAMPED, 0.1)
    u = np.linspace(R1 + 1e-9, 1 - 1e-12, 100)
    s = F.sample_first_passage(UNDERDAMPED, cfg, uniforms=u)
    assert np.all(s.bins == 1)
    est = F.estimate(s)
    assert est.R_hat[1] == 0.0
    assert est.h_hat[0] == pytest.approx(1 / 0.1)
    assert est.n_risk[0] == 100 and est.n_risk[1] == 0
    assert np.all(np.isnan(est.h_hat[1:]))


def test_forced_uniforms_censored_and_bin_rule():
    cfg = F.MonitoringConfig(0.1, 3, t_max=1.0)
    R = reliability_analytic(UNDERDAMPED, cfg.times())
    u = np.array([R[-1] * 0.999, 0.5 * (R[3] + R[4]), R[4]])
    s = F.sample_first_passage(UNDERDAMPED, cfg, uniforms=u)
    # ties R(t_k) == u do not count as failure at t_k
    assert list(s.bins) == [F.CENSORED, 4, 5]
    with pytest.raises(ValidationError):
        F.sample_first_passage(UNDERDAMPED, cfg, uniforms=[0.5])


def test_bin_one_frequency_binomial():
    cfg = F.MonitoringConfig(0.1, 10 ** 6, seed=11)
    s = F.sample_first_passage(UNDERDAMPED, cfg)
    p1 = 1 - reliability_analytic(UNDERDAMPED, 0.1)
    n1 = np.count_nonzero(s.bins == 1)
    sigma = math.sqrt(cfg.n_shots * p1 * (1 - p1))
    assert abs(n1 - cfg.n_shots * p1) <= 4 * sigma
    assert np.all(s.bins[~s.censored] >= 1)


def test_censored_fraction():
    cfg = F.MonitoringConfig(0.1, 10 ** 6, seed=5, t_max=30.0)
    s = F.sample_first_passage(UNDERDAMPED, cfg)
    R = reliability_analytic(UNDERDAMPED, 30.0)
    n = np.count_nonzero(s.censored)
    assert abs(n - cfg.n_shots * R) <= 4 * math.sqrt(cfg.n_shots * R * (1 - R))
    est = F.estimate(s)
    assert est.n_risk[-1] == n + est.n_k[-1]


def test_estimate_invariants():
    s = F.sample_first_passage(UNDERDAMPED, F.MonitoringConfig(0.1, 20000, seed=3))
    est = F.estimate(s)
    assert est.R_hat[0] == 1.0
    assert np.all(np.diff(est.R_hat) <= 0)
    assert est.n_risk[0] == 20000
    np.testing.assert_array_equal(est.n_risk[1:], 20000 - np.cumsum(est.n_k)[:-1])
    ok = ~np.isnan(est.h_hat)
    assert np.all(est.h_hat[ok] >= 0)
    assert np.all(est.n_risk[ok] > 0)
    assert est.n_k[-1] == 0 and np.isnan(est.h_hat[-1])
    assert np.array_equal(est.reliable, est.n_risk >= F.MIN_RISK)
    # R_hat only steps where failures were recorded
    steps = np.nonzero(np.diff(est.R_hat))[0]
    assert np.all(est.n_k[steps] > 0)


def test_empty_sample():
    cfg = F.MonitoringConfig(0.1, 1, t_max=1.0)
    with pytest.raises(EmptySample):
        F.estimate(F.FptSampleSet(np.empty(0, dtype=np.int64), cfg, UNDERDAMPED))


def test_dkw_bound():
    s = F.sample_first_passage(UNDERDAMPED, F.MonitoringConfig(0.1, 10 ** 6, seed=2))
    est = F.estimate(s)
    R = reliability_analytic(UNDERDAMPED, est.t)
    assert np.max(np.abs(est.R_hat - R)) <= 0.005
    # DKW: P(sup > eps) <= 2 exp(-2 N eps^2); at 1e-6 confidence eps ~ 2.7e-3
    assert math.sqrt(math.log(2 / 1e-6) / (2 * 10 ** 6)) < 0.005


@pytest.mark.parametrize("p", REFERENCE_SETS)
def test_chi_square_marginal(p):
    cfg = F.MonitoringConfig(0.1, 10 ** 5, seed=99).resolved(p)
    s = F.sample_first_passage(p, cfg)
    R = reliability_analytic(p, cfg.times())
    probs = np.append(R[:-1] - R[1:], R[-1])
    obs = np.append(np.bincount(s.bins[~s.censored] - 1, minlength=cfg.n_bins()),
                    np.count_nonzero(s.censored))
    # merge sparse tail cells so every expected count is at least 5
    exp = probs * cfg.n_shots
    keep = np.nonzero(exp >= 5)[0]
    cut = keep.max() + 1
    e = np.append(exp[:cut], exp[cut:].sum())
    o = np.append(obs[:cut], obs[cut:].sum())
    if e[-1] < 5:
        e[-2] += e[-1]
        o[-2] += o[-1]
        e, o = e[:-1], o[:-1]
    e = e * o.sum() / e.sum()
    assert stats.chisquare(o, e).pvalue > 1e-3


def test_reproducible_across_chunks_and_workers():
    cfg = F.MonitoringConfig(0.1, 50001, seed=123)
    a = F.sample_first_passage(UNDERDAMPED, cfg)
    b = F.sample_first_passage(UNDERDAMPED, cfg, chunk_size=4097)
    c = F.sample_first_passage(UNDERDAMPED, cfg, chunk_size=1000, workers=3)
    d = F.sample_first_passage(UNDERDAMPED, cfg, chunk_size=7)
    for other in (b, c, d):
        np.testing.assert_array_equal(a.bins, other.bins)
    e = F.sample_first_passage(UNDERDAMPED, F.MonitoringConfig(0.1, 50001, seed=124))
    assert not np.array_equal(a.bins, e.bins)
    f = F.sample_first_passage(UNDERDAMPED, cfg, stream=1)
    assert not np.array_equal(a.bins, f.bins)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 64 - 1), st.integers(0, 500), st.integers(1, 300))
def test_shot_uniforms_are_offset_invariant(seed, start, length):
    full = F.shot_uniforms(seed, 0, start + length)
    np.testing.assert_array_equal(F.shot_uniforms(seed, start, start + length), full[start:])


def test_variance_theory_scaling():
    t = np.array([0.0, 2.5, 10.0, 17.5])
    v1, a1 = F.hazard_variance_theory(UNDERDAMPED, t, F.MonitoringConfig(0.1, 1000))
    v2, a2 = F.hazard_variance_theory(UNDERDAMPED, t, F.MonitoringConfig(0.1, 2000))
    np.testing.assert_allclose(v2, v1 / 2, rtol=1e-14)
    np.testing.assert_allclose(a2, a1 / 2, rtol=1e-14)
    assert a1[0] == 0.0
    assert v1[3] > v1[1] and a1[3] > a1[1]


def test_variance_theory_dt_limit():
    t = np.array([2.5, 10.0])
    ratios = []
    for dt in (0.1, 0.01, 0.001):
        exact, asym = F.hazard_variance_theory(UNDERDAMPED, t, F.MonitoringConfig(dt, 1000))
        ratios.append(np.max(np.abs(asym / exact - 1)))
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] < 1e-2


def test_first_bin_full_risk_set():
    cfg = F.MonitoringConfig(0.1, 1000)
    rows = F.variance_experiment(UNDERDAMPED, cfg, [1000], [0.0, 2.5], repetitions=5)
    assert rows[0].t == 0.0
    for seed_stream in range(3):
        s = F.sample_first_passage(UNDERDAMPED, cfg.resolved(UNDERDAMPED), stream=seed_stream)
        assert F.estimate(s).n_risk[0] == 1000


def test_variance_experiment_shapes_and_validation():
    cfg = F.MonitoringConfig(0.1, 1)
    rows = F.variance_experiment(UNDERDAMPED, cfg, [500, 1000], [2.5, 10.0], repetitions=4)
    assert [(r.n_shots, r.t) for r in rows] == [(500, 2.5), (500, 10.0), (1000, 2.5), (1000, 10.0)]
    assert all(r.var_emp >= 0 and r.var_theory > 0 for r in rows)
    with pytest.raises(ValidationError):
        F.variance_experiment(UNDERDAMPED, cfg, [500], [2.5], repetitions=1)
    with pytest.raises(ValidationError):
        F.variance_experiment(UNDERDAMPED, F.MonitoringConfig(0.1, 1, t_max=5.0), [500], [10.0])


def test_loglog_slope():
    n = np.array([1e3, 1e4, 1e5])
    assert F.loglog_slope(n, 3.0 / n) == pytest.approx(-1.0, abs=1e-12)


def test_estimator_consistency_fine_grid():
    """Dt = 0.01, N = 1e6: h_hat tracks h(t_k) at the 3-sigma level."""
    cfg = F.MonitoringConfig(0.01, 10 ** 6, seed=31)
    est = F.estimate(F.sample_first_passage(UNDERDAMPED, cfg))
    R = reliability_analytic(UNDERDAMPED, est.t)
    sel = (R > 1e-2) & ~np.isnan(est.h_hat) & (est.t > 0)
    h = hazard_analytic(UNDERDAMPED, est.t[sel])
    sd = np.sqrt(est.var_theory[sel])
    # discretisation bias alone stays inside the band
    pk = F.bin_probabilities(UNDERDAMPED, cfg)[: est.t.size - 1]
    bias = np.abs(pk[sel[:-1]] / cfg.dt - h)
    assert np.all(bias < 3 * sd)
    # sampling noise: coverage of the 3-sigma band matches the normal 99.73 %
    cover = np.mean(np.abs(est.h_hat[sel] - h) <= 3 * sd)
    assert cover >= 0.99
    assert np.max(np.abs(est.h_hat[sel] - h) / sd) < 6
