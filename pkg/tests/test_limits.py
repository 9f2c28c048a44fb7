import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

import oracles
from eseplab import limits as lm
from eseplab.analytics import esep_steady_negbin
from eseplab.core import ESEP, HESEP, NGESEP, SIS, ModelParams, RngStreamSpec
from eseplab.errors import Unstable, ValidationError
from eseplab.laws import Law
from eseplab.numerics import ks_statistic, tv_distance
from eseplab.simulators import sample_states, steady_samples


def H(base=1.0, a=3.0, b=2.0, mu=2.0, **kw):
    return ModelParams(baseline=base, jump=a, decay_rate=b, expire_rate=mu, **kw)


# ---------------------------------------------------------------------------
# diffusion bracket


def test_sigma_values_at_reference_point():
    p = H()
    assert lm.diffusion_bound(p, 0).sigma2_nu == pytest.approx(18.0)
    assert lm.diffusion_bound(p, 1).sigma2_nu == pytest.approx(27.0)
    assert lm.diffusion_bound(p, 0.5).sigma2_nu == pytest.approx(22.5)
    assert lm.diffusion_bound(p, 0).nu_inf == pytest.approx(4.0)
    assert lm.ratio_gamma(p) == 0.5


@pytest.mark.parametrize("b", [2.0, 3.0, 1.5])
@pytest.mark.parametrize("gamma", [0.0, 0.4, 1.0])
def test_bound_against_gaussian_oracle(b, gamma):
    # b = 3 hits the equal-rate branch
    p = H(base=1.5, a=3.0, b=b, mu=2.0)
    bd = lm.diffusion_bound(p, gamma)
    for theta, t, nu0, q0 in [((0.3, 0.0), 0.7, 0.0, 0.0), ((0.1, -0.2), 2.0, 0.5, -1.0), ((-0.2, 0.15), 5.0, 1.0, 2.0)]:
        ref = oracles.gaussian_bound_log_mgf(1.5, 3.0, b, 2.0, gamma, theta, t, nu0, q0)
        assert bd.log_mgf(*theta, t, nu0, q0) == pytest.approx(ref, rel=1e-7, abs=1e-10)


@pytest.mark.parametrize("b", [2.0, 3.0])
def test_steady_variances_from_second_derivative(b):
    p = H(base=1.5, a=3.0, b=b, mu=2.0)
    bd = lm.diffusion_bound(p, 0.3)
    h, t = 1e-3, 60.0
    for idx, s2 in ((0, bd.sigma2_nu), (1, bd.sigma2_q)):
        th = [0.0, 0.0]
        th[idx] = h
        plus = bd.log_mgf(*th, t)
        th[idx] = -h
        minus = bd.log_mgf(*th, t)
        assert (plus + minus) / h**2 == pytest.approx(s2, rel=1e-5)
        # steady marginal is Gaussian with mean zero after centring
        th[idx] = 0.2
        assert bd.log_mgf(*th, t) == pytest.approx(0.02 * s2, abs=1e-8)


def test_bound_trivial_cases():
    bd = lm.diffusion_bound(H(), 0.7)
    for t in (0.0, 1.0, 10.0):
        assert bd.mgf(0.0, 0.0, t) == 1.0
    assert bd.log_mgf(0.4, 0.3, 0.0, 1.0, 2.0) == pytest.approx(0.4 + 0.6)


def test_zero_jump_gammas_coincide():
    p = H(base=2.0, a=0.0)
    vals = {lm.diffusion_bound(p, g).sigma2_nu for g in (0.0, 0.5, 1.0)}
    assert len(vals) == 1


def test_bound_errors():
    with pytest.raises(ValidationError):
        lm.diffusion_bound(H(), 1.2)
    with pytest.raises(Unstable):
        lm.diffusion_bound(H(a=5.0), 0.5)


RATE = st.one_of(st.just(0.0), st.floats(1e-3, 5))


@given(st.floats(0.1, 50), RATE, RATE, st.floats(0.1, 5), st.floats(0, 1), st.floats(0, 1))
def test_sigma_monotone_in_gamma(base, a, b, mu, g1, g2):
    p = H(base, a, b, mu)
    if not mu + b > a:
        return
    lo, hi = sorted((g1, g2))
    x, y = lm.diffusion_bound(p, lo), lm.diffusion_bound(p, hi)
    assert x.sigma2_nu <= y.sigma2_nu * (1 + 1e-12)
    assert x.sigma2_q <= y.sigma2_q * (1 + 1e-12) + 1e-12
    assert x.sigma2_q > 0
    assert x.sigma2_nu > 0 or a == 0


def test_near_equal_rates_stay_accurate():
    for gap in (1e-3, 1e-5, 1e-6, 1e-9, 1e-300):
        bd = lm.diffusion_bound(H(base=1.5, a=3.0, b=3.0 + gap, mu=2.0), 0.4)
        ref = oracles.gaussian_bound_log_mgf(1.5, 3.0, 3.0 + gap, 2.0, 0.4, (0.1, 0.2), 3.0, 0.5, 1.0)
        assert bd.log_mgf(0.1, 0.2, 3.0, 0.5, 1.0) == pytest.approx(ref, rel=1e-5)


# ---------------------------------------------------------------------------
# fluid limit


def _mean_ode(p, t, nu0, q0):
    b, a, mu, s = p.decay_rate, p.jump, p.expire_rate, p.baseline

    def f(_u, y):
        return [-(b + mu) * (y[0] - s) + a * y[0], y[0] - mu * y[1]]

    return solve_ivp(f, (0, t), [nu0, q0], rtol=1e-12, atol=1e-12).y[:, -1]


@pytest.mark.parametrize("b", [2.0, 3.0, 1.5])
def test_fluid_means_against_ode(b):
    p = H(base=4.0, a=3.0, b=b, mu=2.0)
    for t in (0.3, 1.0, 4.0):
        ref = _mean_ode(p, t, 7.0, 2.0)
        got = lm.fluid_means(p, t, 7.0, 2.0)
        assert np.allclose(got, ref, rtol=1e-9)


def test_fluid_means_match_simulation():
    p = H(base=5.0, a=3.0, b=2.0, mu=2.0)
    s = sample_states(HESEP, p, [1.0], 20_000, RngStreamSpec(31))
    m_nu, m_q = lm.fluid_means(p, 1.0)
    nu, q = s["intensity"][:, 0], s["Q"][:, 0].astype(float)
    assert abs(nu.mean() - m_nu) < 3 * nu.std() / math.sqrt(nu.size)
    assert abs(q.mean() - m_q) < 3 * q.std() / math.sqrt(q.size)


def test_fluid_mgf_limits_and_linearity():
    p = H(base=4.0, intensity0=6.0, q0=3)
    assert lm.fluid_limit_mgf(p, 0.0, 0.0, 2.0).value == 1.0
    assert math.log(lm.fluid_limit_mgf(p, 0.2, -0.1, 0.0).value) == pytest.approx(0.2 * 6 - 0.1 * 3)
    nu_inf = lm.hesep_mean_rate(p)
    assert math.log(lm.fluid_limit_mgf(p, 0.2, -0.1, 200.0).value) == pytest.approx(
        0.2 * nu_inf - 0.1 * nu_inf / 2.0, rel=1e-10)
    pts = [(0.1, 0.2), (0.3, -0.1), (0.5, -0.4)]  # collinear
    e = [math.log(lm.fluid_limit_mgf(p, a, b, 1.3).value) for a, b in pts]
    assert e[2] - e[1] == pytest.approx(e[1] - e[0], rel=1e-10)


# ---------------------------------------------------------------------------
# renewal


def test_renewal_reference_point():
    p = H(base=10.0, a=2.0, b=2.0, mu=2.0)
    assert lm.hesep_mean_rate(p) == 20.0
    rep = lm.renewal_check(p, [1e3, 1e4], RngStreamSpec(32))
    assert rep.value("relative_error", 1e4) < 0.01
    assert rep.value("interarrival_relative_error", 1e4) < 0.01


def test_renewal_hawkes_and_poisson_reductions():
    rep = lm.renewal_check(H(base=10.0, a=2.0, b=3.0, mu=0.0), [1e4], RngStreamSpec(33))
    assert rep.config["nu_inf"] == pytest.approx(30.0)
    assert rep.value("relative_error", 1e4) < 0.02
    rep = lm.renewal_check(H(base=10.0, a=0.0, b=3.0, mu=1.0), [1e4], RngStreamSpec(34))
    assert rep.value("relative_error", 1e4) < 3 / math.sqrt(1e5)


def test_renewal_unstable():
    with pytest.raises(Unstable):
        lm.renewal_check(H(base=1.0, a=5.0, b=1.0, mu=1.0, stable=True), [10.0], RngStreamSpec(1))


# ---------------------------------------------------------------------------
# SIS


def test_sis_exact_chain_zero_jump():
    p = ModelParams(baseline=10.0, jump=0.0, expire_rate=3.0, population=100)
    exact = lm.sis_truncated_stationary(p)
    assert exact.sum() == pytest.approx(1.0)
    poisson = esep_steady_negbin(p.with_(population=None))
    m = max(exact.size, poisson.probs.size)
    tv = tv_distance(np.pad(exact, (0, m - exact.size)), np.pad(poisson.probs, (0, m - poisson.probs.size)))
    assert tv < 0.05
    q = steady_samples(SIS, p, 20_000, RngStreamSpec(35))["Q"]
    emp = np.bincount(q, minlength=exact.size) / q.size
    assert tv_distance(emp, exact) < 0.03


def test_sis_sweep_structure():
    p = ModelParams(baseline=10.0, jump=2.0, expire_rate=3.0)
    rep = lm.sis_convergence_sweep(p, [1000, 50], 3000, RngStreamSpec(36))
    ns, tv = rep.metric("tv")
    assert ns.tolist() == [50.0, 1000.0]
    assert tv[1] < tv[0]
    assert np.all(rep.metric("tv_se")[1] > 0)


# ---------------------------------------------------------------------------
# batch scaling


def test_matched_hawkes():
    p = ModelParams(baseline=1.0, jump=1.0, duration_law=Law.exponential(2.0))
    hp, k = lm.matched_hawkes(p)
    assert hp.decay_rate == 2.0
    assert k.branching_ratio() == pytest.approx(0.5)
    _, kg = lm.matched_hawkes(p, "geometric")
    assert kg.mark_law.mean() == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        lm.matched_hawkes(p, "poisson")


def test_ngesep_n1_self_consistency():
    p = ModelParams(baseline=5.0, jump=2.0, expire_rate=3.0, batch_law=Law.deterministic_int(1),
                    duration_law=Law.exponential(3.0))
    m = 5000
    a = steady_samples(NGESEP, p, m, RngStreamSpec(37), n=1, burn=10.0)["intensity"]
    b = steady_samples(ESEP, p, m, RngStreamSpec(38), burn=10.0)["intensity"]
    noise = 1.36 * math.sqrt(2.0 / m)
    assert ks_statistic(a, b) < 2 * noise


def test_batch_sweep_small():
    p = ModelParams(baseline=5.0, jump=2.0, duration_law=Law.exponential(3.0))
    rep = lm.batch_scaling_sweep(p, [4, 1], 3000, RngStreamSpec(39))
    ns, ks = rep.metric("ks")
    assert ns.tolist() == [1.0, 4.0]
    assert ks[1] < ks[0]
    assert rep.monotone_expected
    assert np.isfinite(lm.convergence_slope(rep))


# ---------------------------------------------------------------------------
# sandwich and reports


def test_sandwich_parameters_share_means():
    ps = lm.sandwich_params(H(base=5.0, a=2.0, b=1.0, mu=2.0))
    assert ps["hawkes"].decay_rate == 3.0 and ps["esep"].expire_rate == 3.0
    assert lm.hesep_mean_rate(ps["hesep"]) == pytest.approx(15.0)


def test_sandwich_small():
    st_ = lm.sandwich_stats(H(base=5.0, a=2.0, b=1.0, mu=2.0), [2.0], 4000, RngStreamSpec(40))
    v = st_.variance
    assert lm.ordered_within(v["hawkes"], st_.variance_se["hawkes"], v["hesep"], st_.variance_se["hesep"])
    assert lm.ordered_within(v["hesep"], st_.variance_se["hesep"], v["esep"], st_.variance_se["esep"])


def test_sweep_report_round_trip():
    rows = [(2.0, "tv", 0.1, 10, 7), (1.0, "tv", 0.3, 10, None), (1.0, "tv_se", 1 / 3, 10, 7)]
    rep = lm.SweepReport.from_rows(rows, True, {"a": 1})
    assert [r[0] for r in rep.rows] == [1.0, 1.0, 2.0]
    back = lm.SweepReport.from_csv(rep.to_csv(), True, {"a": 1})
    assert back == rep
    with pytest.raises(ValidationError):
        lm.SweepReport.from_rows([(1.0, "tv", 0.1, 0, None)], True)


def test_monotone_within():
    assert lm.monotone_within([0.3, 0.2, 0.21], [0.01, 0.01, 0.01])
    assert not lm.monotone_within([0.1, 0.3], [0.01, 0.01])
