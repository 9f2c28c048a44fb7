"""Numeric kernels: uniformization, RK4, goodness-of-fit statistics, truncated power series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import sparse, special, stats

from .errors import DomainViolation, EmptySample, NegativeTime, StepSizeUnderflow, ValidationError

gammaln = special.gammaln


def log_binom(n, k):
    return gammaln(np.asarray(n) + 1.0) - gammaln(np.asarray(k) + 1.0) - gammaln(np.asarray(n) - k + 1.0)


# ---------------------------------------------------------------------------
# sparse sub-generators and their exponential action


@dataclass(frozen=True, eq=False)
class SparseSubGenerator:
    """Sub-generator of a CTMC in coordinate form.

    Off-diagonal rates are non-negative and each row sums to at most zero;
    the deficit is the rate of leaving the modelled set of states.
    """

    dimension: int
    rows: np.ndarray
    cols: np.ndarray
    rates: np.ndarray
    _transposed: sparse.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        rates = np.asarray(self.rates, dtype=np.float64)
        if not (rows.shape == cols.shape == rates.shape):
            raise ValidationError("rows, cols and rates must have equal length")
        if rows.size and (rows.min() < 0 or cols.min() < 0 or max(rows.max(), cols.max()) >= self.dimension):
            raise ValidationError("entry index out of range")
        off = rows != cols
        if np.any(rates[off] < 0):
            raise ValidationError("off-diagonal rates must be non-negative")
        mat = sparse.coo_matrix((rates, (rows, cols)), shape=(self.dimension, self.dimension)).tocsr()
        rowsum = np.asarray(mat.sum(axis=1)).ravel()
        scale = np.abs(mat.diagonal()).max(initial=1.0)
        if np.any(rowsum > 1e-12 * scale):
            raise ValidationError("row sums of a sub-generator must be non-positive")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "_transposed", mat.T.tocsr())

    @property
    def max_abs_diagonal(self) -> float:
        return float(np.abs(self._transposed.diagonal()).max(initial=0.0))

    def left_multiply(self, v: np.ndarray) -> np.ndarray:
        """Row vector times the generator, ``v^T Z``."""
        return self._transposed @ v

    def dense(self) -> np.ndarray:
        return self._transposed.T.toarray()

    @classmethod
    def from_dense(cls, z: np.ndarray) -> SparseSubGenerator:
        z = np.asarray(z, dtype=float)
        r, c = np.nonzero(z)
        return cls(z.shape[0], r, c, z[r, c])


def expm_action(z: SparseSubGenerator, t: float, v0, rate: float | None = None,
                tol: float = 1e-12) -> np.ndarray:
    """Compute ``v0^T exp(Z t)`` by uniformization.

    With ``P = I + Z / rate`` the result is the Poisson(rate*t) mixture of
    ``v0^T P^k``. Terms are summed until the neglected Poisson mass is below
    ``tol`` (for probability vectors this bounds the absolute error).
    """
    if t < 0:
        raise NegativeTime(f"t must be non-negative, got {t}")
    v = np.array(v0, dtype=float)
    if v.shape != (z.dimension,):
        raise ValidationError("v0 has the wrong dimension")
    lam = z.max_abs_diagonal if rate is None else float(rate)
    if rate is not None and lam < z.max_abs_diagonal * (1 - 1e-14):
        raise ValidationError("uniformization rate must dominate every diagonal entry")
    if t == 0 or lam == 0:
        return v
    mu = lam * t
    out = np.zeros_like(v)
    log_mu = math.log(mu)
    cum = 0.0
    k = 0
    # hard ceiling far beyond the Poisson bulk guards against pathological tol
    kmax = int(mu + 40.0 * math.sqrt(mu) + 100)
    while True:
        w = math.exp(-mu + k * log_mu - math.lgamma(k + 1))
        out += w * v
        cum += w
        if (k > mu and 1.0 - cum < tol) or k >= kmax:
            break
        v = v + z.left_multiply(v) / lam
        k += 1
    # clamp values that overshoot the unit interval by rounding only
    out[(out < 0) & (out > -1e-10)] = 0.0
    out[(out > 1) & (out < 1 + 1e-10)] = 1.0
    return out


# ---------------------------------------------------------------------------
# ODE integration


def rk4_integrate(f: Callable[[float, np.ndarray], np.ndarray], y0, t_grid,
                  max_step: float | None = None) -> np.ndarray:
    """Classical fixed-step RK4; returns the state at every point of ``t_grid``.

    Each grid interval is split into equal substeps no longer than
    ``max_step`` (default: the interval itself).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValidationError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(t_grid) < 0):
        raise ValidationError("t_grid must be non-decreasing")
    y = np.array(y0, dtype=float)
    out = np.empty((t_grid.size, y.size))
    out[0] = y
    for i in range(1, t_grid.size):
        t0, t1 = t_grid[i - 1], t_grid[i]
        span = t1 - t0
        if span == 0:
            out[i] = y
            continue
        m = 1 if max_step is None else max(1, math.ceil(span / max_step - 1e-12))
        h = span / m
        if t0 + h == t0:
            raise StepSizeUnderflow(f"step {h} vanishes against t={t0}")
        t = t0
        for _ in range(m):
            k1 = f(t, y)
            k2 = f(t + h / 2, y + h / 2 * k1)
            k3 = f(t + h / 2, y + h / 2 * k2)
            k4 = f(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out[i] = y
    return out


def central_difference(f: Callable[[float], float], x: float, h: float = 1e-6, order: int = 1) -> float:
    if order == 1:
        return (f(x + h) - f(x - h)) / (2 * h)
    if order == 2:
        return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)
    raise ValidationError("only first and second derivatives are supported")


# ---------------------------------------------------------------------------
# empirical statistics


def _nonempty(x) -> np.ndarray:
    a = np.asarray(x, dtype=float).ravel()
    if a.size == 0:
        raise EmptySample("statistic needs a non-empty sample")
    return a


def ks_statistic(sample_a, sample_b=None, cdf: Callable | None = None) -> float:
    """Kolmogorov-Smirnov distance: two-sample over the pooled sort, or one-sample against ``cdf``."""
    a = np.sort(_nonempty(sample_a))
    if sample_b is not None:
        b = np.sort(_nonempty(sample_b))
        pooled = np.concatenate([a, b])
        fa = np.searchsorted(a, pooled, side="right") / a.size
        fb = np.searchsorted(b, pooled, side="right") / b.size
        return float(np.max(np.abs(fa - fb)))
    if cdf is None:
        raise ValidationError("give either a second sample or a cdf")
    n = a.size
    f = np.asarray(cdf(a), dtype=float)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(n) / n
    return float(max(upper.max(), lower.max()))


def _as_prob(h, support: np.ndarray | None = None) -> dict[int, float]:
    if isinstance(h, Mapping):
        items = {int(k): float(v) for k, v in h.items()}
    else:
        arr = np.asarray(h, dtype=float)
        items = {i: float(v) for i, v in enumerate(arr)}
    total = sum(items.values())
    if total <= 0:
        raise EmptySample("histogram has no mass")
    return {k: v / total for k, v in items.items()}


def tv_distance(hist_a, hist_b) -> float:
    """Total variation distance between two histograms (mappings or arrays indexed from 0)."""
    pa, pb = _as_prob(hist_a), _as_prob(hist_b)
    keys = set(pa) | set(pb)
    return 0.5 * sum(abs(pa.get(k, 0.0) - pb.get(k, 0.0)) for k in keys)


def histogram(values, minlength: int = 0) -> np.ndarray:
    v = np.asarray(values).astype(np.int64).ravel()
    if v.size == 0:
        raise EmptySample("cannot histogram an empty sample")
    if v.min() < 0:
        raise ValidationError("histogram values must be non-negative integers")
    return np.bincount(v, minlength=minlength)


def chi_square(counts, probs, min_expected: float = 5.0, ddof: int = 0) -> tuple[float, float]:
    """Pearson chi-square of integer counts against a pmf on the same support.

    Cells are merged left to right until each expected count reaches
    ``min_expected``; the probability mass outside the given support is
    lumped into the final cell so expected counts sum to the sample size.
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = counts.sum()
    if n <= 0:
        raise EmptySample("chi-square needs observations")
    m = max(counts.size, probs.size)
    c = np.zeros(m)
    c[: counts.size] = counts
    p = np.zeros(m)
    p[: probs.size] = probs
    p[-1] += max(0.0, 1.0 - p.sum())
    exp = n * p
    obs_cells, exp_cells = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(c, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_cells.append(acc_o)
            exp_cells.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if exp_cells:
            obs_cells[-1] += acc_o
            exp_cells[-1] += acc_e
        else:
            obs_cells.append(acc_o)
            exp_cells.append(acc_e)
    o = np.array(obs_cells)
    e = np.array(exp_cells)
    dof = o.size - 1 - ddof
    if dof < 1:
        raise ValidationError("too few cells for a chi-square test")
    stat = float(np.sum((o - e) ** 2 / e))
    return stat, float(stats.chi2.sf(stat, dof))


def mean_and_se(x) -> tuple[float, float]:
    a = _nonempty(x)
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(a.size))


def variance_and_se(x) -> tuple[float, float]:
    """Unbiased sample variance and its large-sample standard error."""
    a = _nonempty(x)
    n = a.size
    d = a - a.mean()
    s2 = float(d @ d / (n - 1))
    m4 = float(np.mean(d**4))
    se = math.sqrt(max(m4 - (n - 3) / (n - 1) * s2 * s2, 0.0) / n)
    return s2, se


# ---------------------------------------------------------------------------
# truncated power series, used to read off Taylor coefficients exactly


class Series:
    """Power series in one variable truncated after ``order`` terms.

    Supports the arithmetic needed to push a closed-form generating
    function through and read its coefficients: +, -, *, /, exp, log and
    real powers.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def variable(cls, x0: float, order: int) -> Series:
        c = np.zeros(order)
        c[0] = x0
        if order > 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def const(cls, v: float, order: int) -> Series:
        c = np.zeros(order)
        c[0] = v
        return cls(c)

    @property
    def order(self) -> int:
        return self.c.size

    def _lift(self, other) -> Series:
        return other if isinstance(other, Series) else Series.const(float(other), self.order)

    def __add__(self, other):
        return Series(self.c + self._lift(other).c)

    __radd__ = __add__

    def __neg__(self):
        return Series(-self.c)

    def __sub__(self, other):
        return Series(self.c - self._lift(other).c)

    def __rsub__(self, other):
        return Series(self._lift(other).c - self.c)

    def __mul__(self, other):
        if not isinstance(other, Series):
            return Series(self.c * float(other))
        return Series(np.convolve(self.c, other.c)[: self.order])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Series):
            return Series(self.c / float(other))
        a, b = self.c, other.c
        if b[0] == 0:
            raise DomainViolation("series division by a series with zero constant term")
        out = np.zeros(self.order)
        for n in range(self.order):
            out[n] = (a[n] - np.dot(out[:n], b[n:0:-1])) / b[0]
        return Series(out)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def exp(self) -> Series:
        a = self.c
        out = np.zeros(self.order)
        out[0] = math.exp(a[0])
        k = np.arange(self.order)
        for n in range(1, self.order):
            out[n] = np.dot(k[1:n + 1] * a[1:n + 1], out[n - 1::-1][:n]) / n
        return Series(out)

    def log(self) -> Series:
        a = self.c
        if a[0] <= 0:
            raise DomainViolation("series logarithm needs a positive constant term")
        out = np.zeros(self.order)
        out[0] = math.log(a[0])
        k = np.arange(self.order)
        for n in range(1, self.order):
            s = np.dot(k[1:n] * out[1:n], a[n - 1:0:-1]) if n > 1 else 0.0
            out[n] = (a[n] - s / n) / a[0]
        return Series(out)

    def __pow__(self, r: float) -> Series:
        return (self.log() * float(r)).exp()

    def sqrt(self) -> Series:
        return self ** 0.5
