import math

import numpy as np
import pytest
from scipy import stats
from scipy.linalg import expm

from eseplab.errors import EmptySample, NegativeTime, ValidationError
from eseplab.numerics import (Series, SparseSubGenerator, central_difference, chi_square, expm_action, histogram,
                              ks_statistic, mean_and_se, rk4_integrate, tv_distance, variance_and_se)


def _random_subgenerator(rng, n):
    off = rng.uniform(0, 2, (n, n)) * (rng.random((n, n)) < 0.7)
    np.fill_diagonal(off, 0.0)
    leak = rng.uniform(0, 1, n)
    return off - np.diag(off.sum(axis=1) + leak)


def test_expm_scalar():
    z = SparseSubGenerator.from_dense(np.array([[-10.0]]))
    assert expm_action(z, 0.3, [1.0])[0] == pytest.approx(math.exp(-3.0), rel=1e-12)


def test_expm_time_zero():
    z = SparseSubGenerator.from_dense(_random_subgenerator(np.random.default_rng(0), 4))
    v = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(expm_action(z, 0.0, v), v)


def test_expm_dense_oracle():
    rng = np.random.default_rng(3)
    for _ in range(5):
        a = _random_subgenerator(rng, 3)
        v = rng.dirichlet(np.ones(3))
        got = expm_action(SparseSubGenerator.from_dense(a), 0.8, v)
        assert np.allclose(got, v @ expm(0.8 * a), atol=1e-9, rtol=0)


def test_expm_rate_independent():
    a = _random_subgenerator(np.random.default_rng(4), 5)
    z = SparseSubGenerator.from_dense(a)
    v = np.eye(5)[0]
    lam = z.max_abs_diagonal
    assert np.allclose(expm_action(z, 1.2, v, rate=lam), expm_action(z, 1.2, v, rate=2 * lam), atol=1e-10)


def test_expm_errors():
    z = SparseSubGenerator.from_dense(np.array([[-1.0]]))
    with pytest.raises(NegativeTime):
        expm_action(z, -1.0, [1.0])
    with pytest.raises(ValidationError):
        SparseSubGenerator.from_dense(np.array([[-1.0, 2.0], [0.0, -1.0]]))


def test_rk4_exponential_and_order():
    f = lambda _t, y: -y
    err = [abs(rk4_integrate(f, [1.0], [0.0, 1.0], h)[-1, 0] - math.exp(-1)) for h in (1e-1, 5e-2)]
    assert rk4_integrate(f, [1.0], [0.0, 1.0], 1e-3)[-1, 0] == pytest.approx(math.exp(-1), abs=1e-8)
    assert 12 < err[0] / err[1] < 20


def test_rk4_zero_field():
    out = rk4_integrate(lambda _t, y: np.zeros_like(y), [1.0, 2.0], [0, 1, 2], 0.1)
    assert np.array_equal(out, np.array([[1.0, 2.0]] * 3))


def test_rk4_esep_mean_ode():
    from eseplab.analytics import esep_mean_nt
    from eseplab.core import ModelParams

    a, b, base = 2.0, 3.0, 10.0
    y = rk4_integrate(lambda _t, y: np.array([b * base - (b - a) * y[0], y[0]]), [base, 0.0], [0.0, 2.0], 1e-3)
    assert y[-1, 1] == pytest.approx(esep_mean_nt(ModelParams(baseline=base, jump=a, expire_rate=b), 2.0), abs=1e-8)


def test_ks_against_scipy():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=300), rng.normal(0.2, size=400)
    assert ks_statistic(a, b) == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-12)
    assert ks_statistic(a, cdf=stats.norm.cdf) == pytest.approx(stats.kstest(a, "norm").statistic, abs=1e-12)
    assert ks_statistic(a, a) == 0.0


def test_tv_edge_cases():
    h = np.array([1, 2, 3])
    assert tv_distance(h, h) == 0.0
    assert tv_distance([1, 0], [0, 1]) == 1.0


def test_tv_negbin_sampler():
    from eseplab.analytics import negbin_log_pmf

    rng = np.random.default_rng(6)
    draws = rng.negative_binomial(5, 1 / 3, 1_000_000)  # numpy counts failures with success prob 1/3
    pmf = np.exp(negbin_log_pmf(np.arange(200), 5, 2 / 3))
    h = histogram(draws, 200)[:200]
    assert tv_distance(h, pmf) < 0.005


def test_chi_square_against_scipy():
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    counts = np.array([12, 18, 33, 37])
    stat, p = chi_square(counts, probs)
    ref = stats.chisquare(counts, probs * counts.sum())
    assert stat == pytest.approx(ref.statistic)
    assert p == pytest.approx(ref.pvalue)


def test_empty_inputs():
    with pytest.raises(EmptySample):
        histogram([])
    with pytest.raises(EmptySample):
        ks_statistic([], [1.0])


def test_moment_helpers():
    x = np.random.default_rng(7).normal(2.0, 3.0, 100_000)
    m, se = mean_and_se(x)
    v, vse = variance_and_se(x)
    assert abs(m - 2.0) < 4 * se
    assert abs(v - 9.0) < 4 * vse


def test_series_arithmetic():
    z = Series.variable(0.3, 6)
    f = ((1.0 + z * 2.0).log() * 1.5).exp()  # (1+2z)^1.5 expanded at 0.3
    g = (1.0 + z * 2.0) ** 1.5
    assert np.allclose(f.c, g.c)
    d1 = central_difference(lambda x: (1 + 2 * x) ** 1.5, 0.3)
    assert f.c[1] == pytest.approx(d1, rel=1e-7)
    s = (z * z + 1.0).sqrt()
    assert (s * s).c[2] == pytest.approx(1.0)
