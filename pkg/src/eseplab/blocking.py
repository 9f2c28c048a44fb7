"""Finite-capacity ESEP: truncated negative binomial steady state and blocking.

Arrivals that find ``capacity`` active entities are blocked; they neither
register nor excite. The stationary law is the ESEP negative binomial
restricted to 0..c, so everything reduces to regularized incomplete beta
values ``I_z(a, b)`` with ``z = jump/expire_rate``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytics import PmfTable, negbin_log_pmf
from .core import ARRIVAL, BLOCK, ESEP_B, EXPIRATION, ModelParams, RngStreamSpec, burn_in, validate_params
from .errors import CapacityMissing, DomainViolation, EmptySample, Unstable, ValidationError
from .numerics import gammaln

_CF_TINY = 1e-300
_CF_EPS = 1e-16
_CF_MAX_ITER = 100_000


def _beta_cf(z: float, a: float, b: float) -> float:
    """Continued fraction for I_z(a, b) (modified Lentz), best for z < (a+1)/(a+b+2)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * z / qap
    d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
    h = d
    for m in range(1, _CF_MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * z / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _CF_TINY else _CF_TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _CF_TINY else _CF_TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise DomainViolation(f"incomplete beta continued fraction did not converge (z={z}, a={a}, b={b})")


def log_beta(a: float, b: float) -> float:
    return float(gammaln(a) + gammaln(b) - gammaln(a + b))


def _log1mexp(x: float) -> float:
    """log(1 - e^x) for x <= 0."""
    if x == 0.0:
        return -math.inf
    return math.log(-math.expm1(x)) if x > -0.693 else math.log1p(-math.exp(x))


def log_incomplete_beta_pair(z: float, a: float, b: float) -> tuple[float, float]:
    """(log I_z(a, b), log(1 - I_z(a, b))), each accurate even when the other side is near 1."""
    if not (0.0 <= z <= 1.0) or not a > 0 or not b > 0:
        raise DomainViolation(f"incomplete beta needs z in [0,1], a > 0, b > 0 (got {z}, {a}, {b})")
    if z == 0.0:
        return -math.inf, 0.0
    if z == 1.0:
        return 0.0, -math.inf
    log_front = a * math.log(z) + b * math.log1p(-z) - log_beta(a, b)
    if z < (a + 1.0) / (a + b + 2.0):
        lo = min(0.0, log_front + math.log(_beta_cf(z, a, b)) - math.log(a))
        return lo, _log1mexp(lo)
    # symmetry: 1 - I_z(a, b) = I_{1-z}(b, a)
    hi = min(0.0, log_front + math.log(_beta_cf(1.0 - z, b, a)) - math.log(b))
    return _log1mexp(hi), hi


def regularized_incomplete_beta(z: float, a: float, b: float) -> float:
    """I_z(a, b) = (1/B(a, b)) * integral_0^z x^(a-1) (1-x)^(b-1) dx."""
    return min(1.0, max(0.0, math.exp(log_incomplete_beta_pair(z, a, b)[0])))


def log_negbin_cdf(k: int, z: float, r: float) -> float:
    """log P(K <= k) for the negative binomial with pmf proportional to Gamma(j+r)/j! z^j.

    P(K <= k) = 1 - I_z(k+1, r); it is zero when k < 0 (empty sum).
    """
    if k < 0:
        return -math.inf
    return log_incomplete_beta_pair(z, k + 1, r)[1]


def negbin_cdf(k: int, z: float, r: float) -> float:
    return math.exp(log_negbin_cdf(k, z, r))


@dataclass(frozen=True)
class BlockingSummary:
    pmf: PmfTable
    mean: float
    variance: float
    block_fraction: float

    @property
    def at_capacity(self) -> float:
        return float(self.pmf.probs[-1])


def _esepb(p: ModelParams) -> ModelParams:
    if p.capacity is None:
        raise CapacityMissing("a finite capacity is required")
    p = validate_params(p, ESEP_B)
    if not p.expire_rate > p.jump:
        raise Unstable(f"steady state needs expire_rate > jump (got {p.expire_rate} <= {p.jump})")
    return p


def _poisson_truncated(p: ModelParams) -> BlockingSummary:
    c, lam = p.capacity, p.baseline / p.expire_rate
    k = np.arange(c + 1)
    logw = k * math.log(lam) - gammaln(k + 1)
    w = np.exp(logw - logw.max())
    probs = w / w.sum()
    mean = float(k @ probs)
    var = float(((k - mean) ** 2) @ probs)
    # arrivals do not depend on the state, so the blocked fraction is P(Q = c)
    return BlockingSummary(PmfTable(probs, 0.0), mean, var, float(probs[-1]))


def esepb_steady(p: ModelParams) -> BlockingSummary:
    """Stationary law, mean, variance and blocked fraction of the ESEP-B."""
    p = _esepb(p)
    if p.jump == 0:
        return _poisson_truncated(p)
    a, b, base, c = p.jump, p.expire_rate, p.baseline, p.capacity
    z, r = a / b, base / a
    log_norm = log_negbin_cdf(c, z, r)
    probs = np.exp(negbin_log_pmf(np.arange(c + 1), r, z) - log_norm)
    scale = base / (b - a)  # eta_inf / beta = r z / (1 - z)
    t1 = math.exp(log_negbin_cdf(c - 1, z, r + 1) - log_norm)
    t2 = math.exp(log_negbin_cdf(c - 2, z, r + 2) - log_norm)
    mean = scale * t1
    variance = scale * (scale + a / (b - a)) * t2 - (scale * t1) ** 2 + scale * t1
    frac = min(1.0, (base + a * c) * probs[-1] / (base + a * mean))
    return BlockingSummary(PmfTable(probs, 0.0), mean, variance, float(frac))


def blocking_fraction(p: ModelParams) -> float:
    """Long-run fraction of arrival attempts that are blocked."""
    return esepb_steady(p).block_fraction


def pasta_ratio(p: ModelParams) -> float:
    """Blocked fraction divided by the time-stationary probability of being full."""
    s = esepb_steady(p)
    return s.block_fraction / s.at_capacity


@dataclass(frozen=True)
class BlockingEstimate:
    block_fraction: float
    block_fraction_se: float
    at_capacity: float
    at_capacity_se: float
    attempts: int


def simulated_blocking(p: ModelParams, horizon: float, rng: RngStreamSpec, burn: float | None = None,
                       batches: int = 50) -> BlockingEstimate:
    """Long-run blocked fraction and time-at-capacity from one long ESEP-B path.

    Standard errors come from non-overlapping batch means over equal time
    windows after the burn-in.
    """
    from .simulators import simulate_esep_b

    p = _esepb(p)
    burn = burn_in(p) if burn is None else burn
    if not horizon > burn:
        raise ValidationError("horizon must exceed the burn-in")
    path = simulate_esep_b(p, horizon, rng)
    step = np.where(path.kinds == ARRIVAL, 1, np.where(path.kinds == EXPIRATION, -1, 0))
    q = p.q0 + np.cumsum(step)
    times = path.times
    edges = np.linspace(burn, horizon, batches + 1)
    fr, cap = np.empty(batches), np.empty(batches)
    attempts = 0
    # state on [times[i], times[i+1]) is q[i]; before the first event it is q0
    knots = np.concatenate([[0.0], times, [horizon]])
    states = np.concatenate([[p.q0], q])
    full = states == p.capacity
    for j in range(batches):
        lo, hi = edges[j], edges[j + 1]
        sel = (times > lo) & (times <= hi)
        blocked = int(np.count_nonzero(sel & (path.kinds == BLOCK)))
        admitted = int(np.count_nonzero(sel & (path.kinds == ARRIVAL)))
        if blocked + admitted == 0:
            raise EmptySample("a batch window contains no arrival attempts")
        attempts += blocked + admitted
        fr[j] = blocked / (blocked + admitted)
        overlap = np.clip(np.minimum(knots[1:], hi) - np.maximum(knots[:-1], lo), 0.0, None)
        cap[j] = float(overlap[full].sum() / (hi - lo))
    sd = math.sqrt(batches)
    return BlockingEstimate(float(fr.mean()), float(fr.std(ddof=1) / sd), float(cap.mean()),
                            float(cap.std(ddof=1) / sd), attempts)


def pasta_ratio_sweep(p: ModelParams, n_list, replications: int = 0, rng: RngStreamSpec | None = None,
                      horizon: float = 2000.0):
    """Ratio of blocked fraction to P(Q = c) when baseline and capacity both scale by n.

    With ``replications > 0`` each row also carries a simulated ratio from
    that many independent long paths.
    """
    from .limits import SweepReport

    base = _esepb(p)
    rows = []
    for n in sorted(int(x) for x in n_list):
        if n < 1:
            raise ValidationError("scales must be positive integers")
        pn = base.with_(baseline=base.baseline * n, capacity=base.capacity * n, q0=0, intensity0=None)
        rows.append((float(n), "pasta_ratio", pasta_ratio(pn), 1, None))
        if replications > 0:
            if rng is None:
                raise ValidationError("a random stream is needed for simulated ratios")
            est = [simulated_blocking(pn, horizon, rng.child(n).child(i)) for i in range(replications)]
            ratio = np.mean([e.block_fraction for e in est]) / np.mean([e.at_capacity for e in est])
            rows.append((float(n), "pasta_ratio_simulated", float(ratio), replications, rng.seed))
    return SweepReport.from_rows(rows, monotone_expected=True)
