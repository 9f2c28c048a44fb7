import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

import oracles
from eseplab import blocking as bl
from eseplab.analytics import esep_steady_negbin
from eseplab.core import ModelParams, RngStreamSpec
from eseplab.errors import CapacityMissing, DomainViolation

CAPPED = ModelParams(baseline=5.0, jump=2.0, expire_rate=3.0, capacity=8)


def test_incomplete_beta_closed_form_and_edges():
    assert bl.regularized_incomplete_beta(2 / 3, 1, 5) == pytest.approx(1 - (1 / 3) ** 5, rel=1e-14)
    assert bl.regularized_incomplete_beta(0.0, 2.0, 3.0) == 0.0
    assert bl.regularized_incomplete_beta(1.0, 2.0, 3.0) == 1.0
    with pytest.raises(DomainViolation):
        bl.regularized_incomplete_beta(0.5, 0.0, 1.0)


@pytest.mark.parametrize("z,a,b", [(0.4, 7.3, 2.1), (0.9, 0.5, 30.0), (0.01, 3.0, 0.2), (0.66, 40.0, 12.0)])
def test_incomplete_beta_oracles(z, a, b):
    got = bl.regularized_incomplete_beta(z, a, b)
    assert got == pytest.approx(special.betainc(a, b, z), rel=1e-12, abs=1e-300)
    assert got == pytest.approx(oracles.incomplete_beta_quadrature(z, a, b), rel=1e-9)


def test_incomplete_beta_recurrence():
    for z in np.linspace(0.05, 0.95, 7):
        for a in (0.5, 1.0, 3.7, 12.0):
            for b in (0.3, 2.0, 5.5):
                lhs = bl.regularized_incomplete_beta(z, a, b)
                step = math.exp(a * math.log(z) + b * math.log1p(-z) - math.log(a) - bl.log_beta(a, b))
                assert abs(lhs - bl.regularized_incomplete_beta(z, a + 1, b) - step) < 1e-12


def test_log_pair_accurate_in_tails():
    lo, hi = bl.log_incomplete_beta_pair(2 / 3, 400.0, 5.0)
    assert math.exp(lo) == pytest.approx(special.betainc(400.0, 5.0, 2 / 3), rel=1e-10)
    assert hi == pytest.approx(0.0, abs=1e-12)


def test_negbin_cdf_conventions():
    assert bl.negbin_cdf(-1, 2 / 3, 5.0) == 0.0
    brute = oracles.negbin_pmf_bruteforce(5.0, 2 / 3, 20).cumsum()
    for k in (0, 3, 10, 20):
        assert bl.negbin_cdf(k, 2 / 3, 5.0) == pytest.approx(brute[k], rel=1e-12)


def test_fig7_pmf_against_bruteforce():
    s = bl.esepb_steady(CAPPED)
    w = oracles.negbin_pmf_bruteforce(2.5, 2 / 3, 8)
    assert np.allclose(s.pmf.probs, w / w.sum(), atol=1e-10, rtol=0)
    k = np.arange(9)
    assert s.mean == pytest.approx(float(k @ s.pmf.probs), rel=1e-12)
    assert s.variance == pytest.approx(float((k - s.mean) ** 2 @ s.pmf.probs), rel=1e-10)
    assert s.mean == pytest.approx(3.6711, abs=1e-4)
    assert s.variance == pytest.approx(5.2607, abs=1e-4)
    assert s.block_fraction == pytest.approx(0.10767, abs=1e-5)


def test_capacity_zero():
    s = bl.esepb_steady(CAPPED.with_(capacity=0))
    assert s.pmf.probs.tolist() == [1.0]
    assert s.mean == 0.0
    assert bl.blocking_fraction(CAPPED.with_(capacity=0)) == pytest.approx(1.0)


def test_large_capacity():
    p = ModelParams(baseline=10.0, jump=2.0, expire_rate=3.0, capacity=200)
    assert bl.esepb_steady(p).mean == pytest.approx(10.0, abs=1e-6)
    assert bl.blocking_fraction(p) < 1e-6


def test_huge_scale_stays_finite():
    p = ModelParams(baseline=5000.0, jump=2.0, expire_rate=3.0, capacity=8000)
    s = bl.esepb_steady(p)
    assert np.isfinite(s.mean) and s.pmf.probs.sum() == pytest.approx(1.0)


def test_zero_jump_is_truncated_poisson():
    p = ModelParams(baseline=4.0, jump=0.0, expire_rate=2.0, capacity=5)
    s = bl.esepb_steady(p)
    k = np.arange(6)
    w = 2.0**k / np.array([math.factorial(i) for i in k])
    assert np.allclose(s.pmf.probs, w / w.sum())
    assert bl.pasta_ratio(p) == pytest.approx(1.0)
    rep = bl.pasta_ratio_sweep(p, [1, 2, 5])
    assert np.allclose(rep.metric("pasta_ratio")[1], 1.0)


def test_missing_capacity():
    with pytest.raises(CapacityMissing):
        bl.esepb_steady(CAPPED.with_(capacity=None))


def test_overdispersion_at_reference_point_and_mild_truncation():
    s = bl.esepb_steady(CAPPED)
    assert s.variance > s.mean
    for base, a, b in [(5, 2, 3), (10, 2, 3), (1, 1, 2), (3, 1, 1.5), (20, 4, 5)]:
        m, v = base / (b - a), base * b / (b - a) ** 2
        c = int(math.ceil(m + 4 * math.sqrt(v)))
        s = bl.esepb_steady(ModelParams(baseline=base, jump=a, expire_rate=b, capacity=c))
        assert s.variance > s.mean


def test_overdispersion_fails_under_heavy_truncation():
    # counterexamples: a tight cap compresses the law below its mean
    for base, a, b, c in [(5, 0.5, 6, 3), (500, 2, 3, 250), (5, 2, 3, 1), (5, 2, 3, 0)]:
        s = bl.esepb_steady(ModelParams(baseline=base, jump=a, expire_rate=b, capacity=c))
        assert s.variance <= s.mean


def test_pasta_directions():
    assert bl.pasta_ratio(CAPPED) > 1.0
    rep = bl.pasta_ratio_sweep(ModelParams(baseline=10.0, jump=2.0, expire_rate=3.0, capacity=5), [1, 2, 5, 10, 50])
    r = rep.metric("pasta_ratio")[1]
    assert np.all(np.diff(r) < 0) and np.all(r > 1)
    assert abs(r[-1] - 1) < 0.05


def test_pasta_limit_when_truncation_does_not_bind():
    # with c >= baseline/(rate - jump) the ratio tends to (baseline + jump c)(rate - jump)/(rate baseline)
    p = CAPPED.with_(capacity=8)
    r = bl.pasta_ratio(p.with_(baseline=5.0 * 400, capacity=8 * 400))
    assert r == pytest.approx((5 + 2 * 8) * 1 / (3 * 5), rel=1e-2)


@pytest.mark.slow
def test_simulated_blocking_and_capacity_frequency():
    est = bl.simulated_blocking(CAPPED, 50_000.0, RngStreamSpec(8))
    s = bl.esepb_steady(CAPPED)
    assert est.attempts > 500_000
    assert abs(est.block_fraction - s.block_fraction) < 3 * est.block_fraction_se
    assert abs(est.at_capacity - s.at_capacity) < 3 * est.at_capacity_se


def test_simulated_blocking_capacity_zero():
    est = bl.simulated_blocking(CAPPED.with_(capacity=0), 200.0, RngStreamSpec(9), batches=10)
    assert est.block_fraction == 1.0


@given(st.floats(0.5, 30), st.floats(0.1, 3), st.floats(0.1, 3), st.integers(0, 60))
def test_esepb_pmf_property(base, a, gap, c):
    p = ModelParams(baseline=base, jump=a, expire_rate=a + gap, capacity=c)
    s = bl.esepb_steady(p)
    w = oracles.negbin_pmf_bruteforce(base / a, a / (a + gap), c)
    assert np.allclose(s.pmf.probs, w / w.sum(), atol=1e-10, rtol=0)
    assert 0.0 <= s.block_fraction <= 1.0


@given(st.floats(0.5, 30), st.floats(0.1, 3), st.floats(0.1, 3))
def test_esepb_converges_to_untruncated(base, a, gap):
    p = ModelParams(baseline=base, jump=a, expire_rate=a + gap)
    full = esep_steady_negbin(p)
    c = full.probs.size - 1
    s = bl.esepb_steady(p.with_(capacity=c))
    assert s.mean == pytest.approx(full.mean(), rel=1e-8)
