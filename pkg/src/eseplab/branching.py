"""Cluster laws of the ESEP and the exponential-kernel Hawkes process.

Every arrival spawns direct offspring while it is active: geometric
numbers for the ESEP (active for an Exp(beta) time, children at rate
alpha) and Poisson(alpha/beta) numbers for the Hawkes process. The laws
below follow from that immigration-birth picture. ``p.jump`` is alpha and
the decay parameter is ``expire_rate`` for the ESEP and ``decay_rate``
for Hawkes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ESEP, HAWKES, ModelParams
from .errors import Unstable, ValidationError
from .numerics import gammaln

_TAIL_TOL = 1e-12
_MAX_K = 10_000_000


@dataclass(frozen=True)
class DiscreteLaw:
    """PMF on ``offset, offset+1, ..., offset+len(probs)-1`` plus the mass beyond."""

    probs: np.ndarray
    tail_mass: float
    mean: float
    variance: float
    offset: int = 0

    @property
    def support(self) -> np.ndarray:
        return self.offset + np.arange(self.probs.size)

    def pmf(self, k: int) -> float:
        i = k - self.offset
        return float(self.probs[i]) if 0 <= i < self.probs.size else 0.0

    def cdf(self, k: int) -> float:
        i = k - self.offset
        if i < 0:
            return 0.0
        return float(self.probs[: i + 1].sum())

    def table_mean(self) -> float:
        return float(self.support @ self.probs)

    def pgf(self, z: float) -> float:
        """PGF of the tabulated part; accurate when the tail mass is negligible."""
        return float(np.sum(self.probs * np.power(z, self.support, dtype=float)))


def _rate(p: ModelParams, model: str) -> float:
    if model == ESEP:
        return p.expire_rate
    if model == HAWKES:
        return p.decay_rate
    raise ValidationError(f"cluster laws exist for 'esep' and 'hawkes', not {model!r}")


def _subcritical(p: ModelParams, model: str = ESEP) -> tuple[float, float]:
    a, b = p.jump, _rate(p, model)
    if a < 0 or not b > 0:
        raise ValidationError("need jump >= 0 and a positive rate")
    if not b > a:
        raise Unstable(f"cluster laws need rate > jump (got {b} <= {a})")
    return a, b


def _point_mass(at: int) -> DiscreteLaw:
    return DiscreteLaw(np.array([1.0]), 0.0, float(at), 0.0, offset=at)


def _table(logpmf, offset: int, ratio_bound: float, mean: float, var: float, K: int | None) -> DiscreteLaw:
    """Tabulate exp(logpmf(k)) from ``offset``; extend K until term*ratio/(1-ratio) < tol."""
    if K is None:
        K = 64
        while True:
            last = math.exp(float(logpmf(np.array([offset + K]))[0]))
            if last * ratio_bound / (1 - ratio_bound) < _TAIL_TOL or K > _MAX_K:
                break
            K *= 2
    k = offset + np.arange(K)
    probs = np.exp(logpmf(k))
    return DiscreteLaw(probs, max(0.0, 1.0 - float(probs.sum())), mean, var, offset)


# ---------------------------------------------------------------------------
# offspring and total progeny


def offspring_law(p: ModelParams, model: str, K: int | None = None) -> DiscreteLaw:
    """Direct children of one arrival: Geometric(beta/(alpha+beta)) on {0,1,...} or Poisson(alpha/beta)."""
    a, b = _subcritical(p, model)
    if a == 0:
        return _point_mass(0)
    m = a / b
    if model == ESEP:
        q = b / (a + b)
        return _table(lambda k: math.log(q) + k * math.log1p(-q), 0, 1 - q, m, m * (a + b) / b, K)
    return _table(lambda k: k * math.log(m) - m - gammaln(k + 1), 0, m, m, m, K)


def progeny_law(p: ModelParams, model: str, K: int | None = None) -> DiscreteLaw:
    """Total cluster size including the founder.

    ESEP: (1/k) C(2k-2, k-1) (b/(a+b))^k (a/(a+b))^(k-1), a Catalan-weighted law.
    Hawkes: Borel, exp(-ak/b) (ak/b)^(k-1) / k!.
    """
    a, b = _subcritical(p, model)
    if a == 0:
        return _point_mass(1)
    m = a / b
    off_var = m * (a + b) / b if model == ESEP else m
    mean, var = b / (b - a), off_var / (1 - m) ** 3
    if model == ESEP:
        lq, lr = math.log(b / (a + b)), math.log(a / (a + b))

        def logpmf(k):
            k = np.asarray(k, dtype=float)
            lbin = gammaln(2 * k - 1) - 2 * gammaln(k)
            return lbin - np.log(k) + k * lq + (k - 1) * lr

        return _table(logpmf, 1, 4 * a * b / (a + b) ** 2, mean, var, K)

    def borel(k):
        k = np.asarray(k, dtype=float)
        return -m * k + (k - 1) * np.log(m * k) - gammaln(k + 1)

    return _table(borel, 1, m * math.exp(1 - m), mean, var, K)


def progeny_by_convolution(p: ModelParams, model: str, kmax: int) -> np.ndarray:
    """P(Z = k), k = 1..kmax, via the hitting-time identity P(Z=k) = P(X_1+...+X_k = k-1)/k.

    The k-fold offspring sum is built by repeated convolution of the
    offspring table, an independent route to the closed forms.
    """
    off = offspring_law(p, model, K=kmax + 1).probs[: kmax]
    out = np.zeros(kmax)
    conv = np.array([1.0])
    for k in range(1, kmax + 1):
        conv = np.convolve(conv, off)[:kmax]
        out[k - 1] = conv[k - 1] / k if k - 1 < conv.size else 0.0
    return out


# ---------------------------------------------------------------------------
# generations


def generations_law_esep(p: ModelParams, K: int | None = None) -> DiscreteLaw:
    """Number of generations in an ESEP cluster (the founder is generation 1).

    P(G > k) = a^k (b-a) / (b^(k+1) - a^(k+1)), so P(G = k) is a difference of
    consecutive tail values.
    """
    a, b = _subcritical(p, ESEP)
    if a == 0:
        return _point_mass(1)
    r = a / b

    def tail(k):
        # a^k (b-a)/(b^(k+1)-a^(k+1)) = r^k (1-r) / (1 - r^(k+1)), stable for large k
        k = np.asarray(k, dtype=float)
        return np.exp(k * math.log(r) + math.log1p(-r) - np.log1p(-np.exp((k + 1) * math.log(r))))

    if K is None:
        K = int(math.ceil(math.log(_TAIL_TOL) / math.log(r))) + 2
    k = 1 + np.arange(K)
    probs = tail(k - 1) - tail(k)
    mean = float(np.sum(tail(np.arange(K + 200))))
    second = float(np.sum((2 * np.arange(K + 200) + 1) * tail(np.arange(K + 200))))
    return DiscreteLaw(probs, float(tail(np.array([K]))[0]), mean, second - mean * mean, offset=1)


def generations_cdf_esep_recursive(p: ModelParams, k: int) -> float:
    """P(G <= k) by iterating the geometric offspring PGF from 0."""
    a, b = _subcritical(p, ESEP)
    f = 0.0
    for _ in range(k):
        f = b / (a + b - a * f)
    return f


def generations_cdf_hawkes(p: ModelParams, k: int) -> float:
    """P(G <= k) for a Hawkes cluster: F(k) = exp(-(a/b)(1 - F(k-1))), F(0) = 0."""
    a, b = _subcritical(p, HAWKES)
    if k < 0:
        raise ValidationError("k must be non-negative")
    f = 0.0
    for _ in range(k):
        f = math.exp(-(a / b) * (1 - f))
    return f


def generations_law_hawkes(p: ModelParams, K: int = 200) -> DiscreteLaw:
    a, b = _subcritical(p, HAWKES)
    cdf = np.array([generations_cdf_hawkes(p, k) for k in range(K + 1)])
    probs = np.diff(cdf)
    mean = float(np.sum(1 - cdf))
    return DiscreteLaw(probs, float(1 - cdf[-1]), mean, math.nan, offset=1)


# ---------------------------------------------------------------------------
# families in steady state


def family_duration_mean(p: ModelParams) -> float:
    """E[tau] = (1/a) log(b/(b-a)): expected time until an ESEP family has no active member."""
    a, b = _subcritical(p, ESEP)
    if a == 0:
        return 1.0 / b
    return -math.log1p(-a / b) / a


def family_duration_series(p: ModelParams, terms: int = 200) -> float:
    """Truncated series (1/a) sum_i (1/i)(a/b)^i."""
    a, b = _subcritical(p, ESEP)
    if a == 0:
        return 1.0 / b
    i = np.arange(1, terms + 1)
    return float(np.sum((a / b) ** i / i) / a)


def active_families_law(p: ModelParams, K: int | None = None) -> DiscreteLaw:
    """Steady number of families with an active member: Poisson(baseline * E[tau])."""
    a, b = _subcritical(p, ESEP)
    lam = p.baseline * family_duration_mean(p)
    if lam == 0:
        return _point_mass(0)
    if K is None:
        K = int(lam + 12 * math.sqrt(lam) + 40)
    k = np.arange(K + 1)
    probs = np.exp(k * math.log(lam) - lam - gammaln(k + 1))
    return DiscreteLaw(probs, max(0.0, 1.0 - float(probs.sum())), lam, lam)


def logarithmic_law(p: ModelParams, K: int | None = None) -> DiscreteLaw:
    """Active members of one family: P(L=k) = (a/b)^k / (k log(b/(b-a))), k >= 1."""
    a, b = _subcritical(p, ESEP)
    if a == 0:
        return _point_mass(1)
    r = a / b
    norm = -math.log1p(-r)
    mean = r / ((1 - r) * norm)
    var = r * (1 - r / norm) / ((1 - r) ** 2 * norm)
    return _table(lambda k: k * math.log(r) - np.log(k) - math.log(norm), 1, r, mean, var, K)


def logarithmic_pgf(p: ModelParams, z: float) -> float:
    a, b = _subcritical(p, ESEP)
    r = a / b
    return math.log1p(-r * z) / math.log1p(-r)


def compound_poisson_logarithmic_pgf(p: ModelParams, z: float) -> float:
    """PGF of a Poisson(active families) sum of independent logarithmic family sizes."""
    lam = p.baseline * family_duration_mean(p)
    if p.jump == 0:
        return math.exp(lam * (z - 1))
    return math.exp(lam * (logarithmic_pgf(p, z) - 1.0))
