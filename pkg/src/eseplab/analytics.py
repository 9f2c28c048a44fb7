"""Closed-form transforms and distributions for the ESEP family.

Conventions: ``N_t`` counts ``n0`` plus the arrivals in (0, t]; ``D_t``
counts expirations in (0, t] plus an optional ``d0``. Intensity and
counting transforms take their initial state from ``q0``, ``n0`` and the
affine intensity ``baseline + jump*q0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ESEP, HAWKES, ModelParams, validate_params
from .errors import BranchViolation, DimensionOverflow, DomainViolation, Unstable, ValidationError
from .numerics import Series, SparseSubGenerator, expm_action, gammaln, rk4_integrate

_DENOM_EPS = 1e-12


@dataclass(frozen=True)
class TransformResult:
    value: float
    argument: float | tuple[float, ...]
    in_domain: bool
    domain_bound: float | None = None

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class PmfTable:
    """Probabilities on 0..K plus the mass beyond K."""

    probs: np.ndarray
    truncation_mass: float

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.probs.size)

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot((self.support - m) ** 2, self.probs))

    def __getitem__(self, k: int) -> float:
        return float(self.probs[k]) if 0 <= k < self.probs.size else 0.0


def _esep(p: ModelParams, need_stable: bool = False) -> ModelParams:
    p = validate_params(p, ESEP)
    if need_stable and not p.stable:
        raise Unstable(f"steady state needs expire_rate > jump (got {p.expire_rate} <= {p.jump})")
    return p


def eta_infinity(p: ModelParams) -> float:
    """Stationary mean intensity baseline*expire/(expire - jump)."""
    p = _esep(p, need_stable=True)
    return p.expire_rate * p.baseline / (p.expire_rate - p.jump)


def _fail(strict: bool, msg: str, arg, bound=None, exc=DomainViolation) -> TransformResult:
    if strict:
        raise exc(msg)
    return TransformResult(math.nan, arg, False, bound)


def _pow(base: float, expo: float, what: str) -> float:
    if base > 0:
        return base**expo
    if float(expo).is_integer():
        return base ** int(expo)
    raise DomainViolation(f"{what}: non-positive base {base} under fractional power {expo}")


# ---------------------------------------------------------------------------
# transient intensity / queue transforms


def _queue_ratio(p: ModelParams, z: float, t: float) -> float:
    a, b = p.jump, p.expire_rate
    e = math.exp(-(b - a) * t)
    num = b - a * z - b * (1 - z) * e
    den = b - a * z - a * (1 - z) * e
    if abs(den) < _DENOM_EPS:
        raise DomainViolation("transient transform denominator vanishes")
    return num / den


def esep_transient_mgf(p: ModelParams, theta: float, t: float, strict: bool = True) -> TransformResult:
    """E[exp(theta * eta_t)] for the ESEP intensity, valid for theta < log(beta/alpha)/alpha."""
    p = _esep(p, need_stable=True)
    a, b, base = p.jump, p.expire_rate, p.baseline
    if t < 0:
        raise ValidationError("t must be non-negative")
    if a == 0:
        return TransformResult(math.exp(theta * base), theta, True, math.inf)
    bound = math.log(b / a) / a
    if not theta < bound:
        return _fail(strict, f"theta={theta} outside (-inf, {bound})", theta, bound)
    z = math.exp(a * theta)
    if abs(b - a * z) < _DENOM_EPS:
        return _fail(strict, "denominator beta - alpha e^(alpha theta) vanishes", theta, bound)
    ratio = _queue_ratio(p, z, t)
    second = b * z / (b - a * z) - a * z / (b - a * z) * ratio
    value = _pow(ratio, (p.intensity0 - base) / a, "mgf") * _pow(second, base / a, "mgf")
    return TransformResult(value, theta, True, bound)


def esep_qt_pgf(p: ModelParams, z: float, t: float, strict: bool = True) -> TransformResult:
    """E[z^{Q_t}] from the transient solution of the queue PGF equation."""
    p = _esep(p, need_stable=True)
    a, b = p.jump, p.expire_rate
    if t < 0:
        raise ValidationError("t must be non-negative")
    if a == 0:
        # M/M/infinity: surviving initial entities plus Poisson arrivals
        keep = math.exp(-b * t)
        lam = p.baseline * (1 - keep) / b
        return TransformResult((1 - keep + keep * z) ** p.q0 * math.exp(lam * (z - 1)), z, True, math.inf)
    bound = b / a
    if not z < bound:
        return _fail(strict, f"z={z} must stay below beta/alpha={bound}", z, bound)
    ratio = _queue_ratio(p, z, t)
    second = b / (b - a * z) - a / (b - a * z) * ratio
    try:
        value = _pow(ratio, p.q0, "pgf") * _pow(second, p.baseline / a, "pgf")
    except DomainViolation as exc:
        return _fail(strict, str(exc), z, bound)
    return TransformResult(value, z, True, bound)


# ---------------------------------------------------------------------------
# steady state


def negbin_log_pmf(k, r: float, prob: float) -> np.ndarray:
    """log P(K=k) for the law Gamma(k+r)/(Gamma(r) k!) (1-prob)^r prob^k."""
    k = np.asarray(k, dtype=float)
    return gammaln(k + r) - gammaln(r) - gammaln(k + 1) + r * math.log1p(-prob) + k * math.log(prob)


def esep_steady_moments(p: ModelParams) -> tuple[float, float]:
    p = _esep(p, need_stable=True)
    prob, r = p.jump / p.expire_rate, p.baseline / p.jump if p.jump else math.inf
    if p.jump == 0:
        m = p.baseline / p.expire_rate
        return m, m
    return r * prob / (1 - prob), r * prob / (1 - prob) ** 2


def esep_steady_negbin(p: ModelParams, K: int | None = None, tail_tol: float = 1e-13) -> PmfTable:
    """Stationary law of Q: negative binomial with success probability jump/expire_rate.

    With ``K=None`` the table is extended until the tail mass drops below
    ``tail_tol``.
    """
    from .blocking import regularized_incomplete_beta

    p = _esep(p, need_stable=True)
    a, b = p.jump, p.expire_rate
    if a == 0:
        lam = p.baseline / b
        if K is None:
            K = int(lam + 12 * math.sqrt(lam) + 40)
        k = np.arange(K + 1)
        probs = np.exp(k * math.log(lam) - lam - gammaln(k + 1)) if lam > 0 else (k == 0).astype(float)
        return PmfTable(probs, max(0.0, 1.0 - probs.sum()))
    prob, r = a / b, p.baseline / a
    mean, var = esep_steady_moments(p)
    if K is None:
        K = int(mean + 10 * math.sqrt(var) + 20)
        while regularized_incomplete_beta(prob, K + 1, r) > tail_tol:
            K = int(K * 1.5) + 10
    probs = np.exp(negbin_log_pmf(np.arange(K + 1), r, prob))
    return PmfTable(probs, regularized_incomplete_beta(prob, K + 1, r))


def negbin_pgf(p: ModelParams, z: float) -> float:
    """Stationary PGF ((1 - a/b) / (1 - (a/b) z))^(baseline/a)."""
    p = _esep(p, need_stable=True)
    prob = p.jump / p.expire_rate
    if p.jump == 0:
        return math.exp(p.baseline / p.expire_rate * (z - 1))
    if not prob * z < 1:
        raise DomainViolation("negative binomial PGF diverges for z >= expire_rate/jump")
    return ((1 - prob) / (1 - prob * z)) ** (p.baseline / p.jump)


# ---------------------------------------------------------------------------
# counting process and joint queue/departure transforms


def _radicand_root(p: ModelParams, z: float) -> float:
    a, b = p.jump, p.expire_rate
    rad = (b + a) ** 2 - 4 * a * b * z
    if not rad > 0:
        raise BranchViolation(f"radicand (beta+alpha)^2 - 4 alpha beta z = {rad} is not positive")
    return math.sqrt(rad)


def _log_cosh(y: float) -> float:
    y = abs(y)
    return y + math.log1p(math.exp(-2 * y)) - math.log(2.0)


def esep_counting_pgf(p: ModelParams, z: float, t: float, form: str = "exponential") -> TransformResult:
    """E[z^{N_t}] with ``N_t = n0 + arrivals in (0, t]``.

    ``form="exponential"`` is the large-t-stable production evaluator;
    ``form="hyperbolic"`` evaluates the tanh/cosh expression literally and
    is only real for 0 < z < 1.
    """
    p = _esep(p)
    if t < 0:
        raise ValidationError("t must be non-negative")
    if form == "hyperbolic":
        if z <= 0:
            raise BranchViolation("the literal hyperbolic form needs z > 0")
        g = joint_qd_pgf_literal(p, z, z, t).value
        return TransformResult(g * z ** (p.n0 - p.q0), z, True)
    if form != "exponential":
        raise ValidationError(f"unknown form {form!r}")
    a, b, base = p.jump, p.expire_rate, p.baseline
    if a == 0:
        return TransformResult(z ** p.n0 * math.exp(base * t * (z - 1)), z, True)
    s = _radicand_root(p, z)
    u = (b + a - 2 * a * z) / s
    e = math.exp(-t * s)
    den = (1 - u) * e + (1 + u)
    if not den > _DENOM_EPS:
        raise DomainViolation("counting PGF denominator is not positive")
    log_first = base * (b - a) * t / (2 * a) + (base / a) * (math.log(2.0) - t * s / 2 - math.log(den))
    # second factor divided by z; its z^{q0} cancels the z^{-q0} from N_0 = n0
    g = ((b - a) / s * (1 - e) + e + 1) / den
    value = math.exp(log_first) * _pow(g, p.q0, "counting pgf") * z**p.n0
    return TransformResult(value, z, True)


def joint_qd_pgf(p: ModelParams, z1: float, z2: float, t: float, d0: int = 0) -> TransformResult:
    """E[z1^{Q_t} z2^{D_t}] with ``D_0 = d0``.

    The tanh of a shifted inverse tanh is expanded by the addition
    formula, which keeps the expression real for every real argument with a
    positive radicand (the literal form needs |x| < 1).
    """
    p = _esep(p)
    if t < 0:
        raise ValidationError("t must be non-negative")
    a, b, base = p.jump, p.expire_rate, p.baseline
    if a == 0:
        keep = math.exp(-b * t)
        lam = base / b
        # M/M/infinity with departures tracked: each entity is alive (z1) or gone (z2)
        arrivals = math.exp(base * t * (z2 - 1) + lam * (1 - keep) * (z1 - z2))
        return TransformResult(z2**d0 * (keep * z1 + (1 - keep) * z2) ** p.q0 * arrivals, (z1, z2), True)
    s = _radicand_root(p, z2)
    x = (b + a - 2 * a * z1) / s
    y = t * s / 2
    tt = math.tanh(y)
    den = 1 + x * tt
    if not den > _DENOM_EPS:
        raise DomainViolation("joint PGF denominator 1 + x tanh(ts/2) is not positive")
    log_first = base * (b - a) * t / (2 * a) - (base / a) * (_log_cosh(y) + math.log(den))
    w = (tt + x) / den
    second = (b + a) / (2 * a) - s / (2 * a) * w
    value = z2**d0 * math.exp(log_first) * _pow(second, p.q0, "joint pgf")
    return TransformResult(value, (z1, z2), True)


def joint_qd_pgf_literal(p: ModelParams, z1: float, z2: float, t: float, d0: int = 0) -> TransformResult:
    """The tanh/cosh closed form term by term; raises BranchViolation where atanh leaves (-1, 1)."""
    p = _esep(p)
    a, b, base = p.jump, p.expire_rate, p.baseline
    s = _radicand_root(p, z2)
    x = (b + a - 2 * a * z1) / s
    if not abs(x) < 1:
        raise BranchViolation(f"inverse tanh argument {x} outside (-1, 1)")
    w = math.tanh(t * s / 2 + math.atanh(x))
    ch = math.cosh(math.atanh((2 * a * z1 - b - a) / s))
    value = (z2**d0 * math.exp(base * (b - a) * t / (2 * a)) * (1 - w * w) ** (base / (2 * a))
             * ((b + a) / (2 * a) - s / (2 * a) * w) ** p.q0 * ch ** (base / a))
    return TransformResult(value, (z1, z2), True)


def counting_generator(p: ModelParams, n: int, max_dim: int = 5000) -> SparseSubGenerator:
    """Block-bidiagonal sub-generator on {(Q, arrivals) : arrivals <= n}.

    Block i lists states (q0+i, i), ..., (0, i). Within a block an
    expiration moves q -> q-1 at rate expire*q; an arrival moves
    (q, i) -> (q+1, i+1) at rate baseline + jump*q, and arrivals out of the
    last block leave the modelled set.
    """
    p = _esep(p)
    if n < 0 or int(n) != n:
        raise ValidationError("n must be a non-negative integer")
    k = p.q0
    dim = n * (n + 1) // 2 + (n + 1) * (k + 1)
    if dim > max_dim:
        raise DimensionOverflow(f"matrix dimension {dim} exceeds cap {max_dim}")
    a, b, base = p.jump, p.expire_rate, p.baseline
    rows, cols, rates = [], [], []
    off = 0
    for i in range(n + 1):
        size = k + i + 1
        j = k + i - np.arange(size)  # queue length of each state in the block
        idx = off + np.arange(size)
        rows.append(idx)
        cols.append(idx)
        rates.append(-(base + j * (a + b)))
        live = j > 0
        rows.append(idx[live])
        cols.append(idx[live] + 1)
        rates.append(b * j[live])
        if i < n:
            nxt = off + size
            rows.append(idx)
            cols.append(nxt + np.arange(size))
            rates.append(base + a * j)
        off += size
    return SparseSubGenerator(dim, np.concatenate(rows), np.concatenate(cols), np.concatenate(rates))


def counting_pmf_matrix(p: ModelParams, n: int, t: float, max_dim: int = 5000) -> float:
    """P(N_t = n) as the block-n mass of exp(Z t) started from (q0, 0)."""
    p = _esep(p)
    m = n - p.n0
    if m < 0:
        return 0.0
    z = counting_generator(p, m, max_dim)
    v0 = np.zeros(z.dimension)
    v0[0] = 1.0
    v = expm_action(z, t, v0)
    last = m + p.q0 + 1
    return float(min(1.0, max(0.0, v[-last:].sum())))


def counting_pmf_series(p: ModelParams, t: float, n_max: int) -> np.ndarray:
    """P(N_t = n) for n = 0..n_max as exact Taylor coefficients of the counting PGF at z = 0.

    The exponential-form PGF is evaluated in truncated power-series
    arithmetic, so no finite differences are involved.
    """
    p = _esep(p)
    a, b, base = p.jump, p.expire_rate, p.baseline
    order = n_max + 1
    z = Series.variable(0.0, order)
    if a == 0:
        g = (base * t * (z - 1.0)).exp()
    else:
        s = ((b + a) ** 2 - 4 * a * b * z).sqrt()
        u = (b + a - 2 * a * z) / s
        e = (s * (-t)).exp()
        den = (1.0 - u) * e + (1.0 + u)
        log_first = (den.log() * (-1.0) - s * (t / 2) + math.log(2.0)) * (base / a) + base * (b - a) * t / (2 * a)
        second = ((1.0 - e) * ((b - a)) / s + e + 1.0) / den
        g = log_first.exp()
        for _ in range(p.q0):
            g = g * second
    out = np.zeros(order)
    if p.n0 < order:
        out[p.n0:] = g.c[: order - p.n0]
    return out


# ---------------------------------------------------------------------------
# means and moment hierarchies


def _rel_one_minus_exp(x: float) -> float:
    """(1 - e^{-x}) / x, continuous at 0."""
    return 1.0 - x / 2 + x * x / 6 if abs(x) < 1e-8 else -math.expm1(-x) / x


def _rel_second(x: float) -> float:
    """(x - 1 + e^{-x}) / x^2, continuous at 0."""
    if abs(x) < 1e-3:
        return 0.5 - x / 6 + x * x / 24 - x**3 / 120
    return (x + math.expm1(-x)) / (x * x)


def esep_mean_nt(p: ModelParams, t: float) -> float:
    """E[N_t]: n0 plus the expected arrivals in (0, t].

    Written as eta0*t*h((b-a)t) + b*baseline*t^2*g((b-a)t) with
    h(x) = (1-e^{-x})/x and g(x) = (x-1+e^{-x})/x^2, which equals the usual
    closed form for b != a and is its continuous limit at b == a.
    """
    p = _esep(p)
    if t < 0:
        raise ValidationError("t must be non-negative")
    x = (p.expire_rate - p.jump) * t
    return p.n0 + p.intensity0 * t * _rel_one_minus_exp(x) + p.expire_rate * p.baseline * t * t * _rel_second(x)


@dataclass(frozen=True)
class MomentTrajectories:
    """Raw intensity moments E[X^j] (j = 1..m) and counting moments on a time grid."""

    t: np.ndarray
    esep_intensity: np.ndarray
    hawkes_intensity: np.ndarray
    esep_count: np.ndarray  # columns E[N], E[N^2]
    hawkes_count: np.ndarray

    @property
    def esep_count_variance(self) -> np.ndarray:
        return self.esep_count[:, 1] - self.esep_count[:, 0] ** 2

    @property
    def hawkes_count_variance(self) -> np.ndarray:
        return self.hawkes_count[:, 1] - self.hawkes_count[:, 0] ** 2

    @property
    def esep_intensity_variance(self) -> np.ndarray:
        return self.esep_intensity[:, 1] - self.esep_intensity[:, 0] ** 2

    @property
    def hawkes_intensity_variance(self) -> np.ndarray:
        return self.hawkes_intensity[:, 1] - self.hawkes_intensity[:, 0] ** 2


def _esep_rhs(a: float, b: float, base: float, m: int):
    c = [[math.comb(j, k) for k in range(j)] for j in range(m + 1)]

    def rhs(_t, y):
        mom = np.concatenate([[1.0], y[:m]])
        out = np.empty_like(y)
        for j in range(1, m + 1):
            acc = 0.0
            for k in range(j):
                up = c[j][k] * a ** (j - k) * mom[k + 1]
                # (b/a) C(j,k) (-a)^(j-k) written without dividing by a
                down = b * c[j][k] * (-1) ** (j - k) * a ** (j - k - 1) * (mom[k + 1] - base * mom[k])
                acc += up + down
            out[j - 1] = acc
        en, eyn = y[m], y[m + 1]
        out[m] = mom[1]
        out[m + 1] = -(b - a) * eyn + b * base * en + a * mom[1] + mom[2]
        out[m + 2] = mom[1] + 2 * eyn
        return out

    return rhs


def _hawkes_rhs(a: float, b: float, base: float, m: int):
    c = [[math.comb(j, k) for k in range(j)] for j in range(m + 1)]

    def rhs(_t, y):
        mom = np.concatenate([[1.0], y[:m]])
        out = np.empty_like(y)
        for j in range(1, m + 1):
            acc = sum(c[j][k] * a ** (j - k) * mom[k + 1] for k in range(j))
            out[j - 1] = acc - j * b * mom[j] + j * b * base * mom[j - 1]
        en, eyn = y[m], y[m + 1]
        out[m] = mom[1]
        out[m + 1] = -(b - a) * eyn + b * base * en + a * mom[1] + mom[2]
        out[m + 2] = mom[1] + 2 * eyn
        return out

    return rhs


def moment_odes(p_esep: ModelParams, p_hawkes: ModelParams, m: int, t_grid, max_step: float = 1e-3) -> MomentTrajectories:
    """Integrate the closed moment hierarchies of a matched ESEP/Hawkes pair.

    Intensity moments up to order ``m`` (at most 4) plus E[N], E[N^2] via the
    mixed moment E[intensity * N]. The Hawkes record uses ``decay_rate``.
    """
    if not 1 <= m <= 4:
        raise ValidationError("moment order must lie in 1..4")
    pe = validate_params(p_esep, ESEP)
    ph = validate_params(p_hawkes, HAWKES)
    mm = max(m, 2)
    t_grid = np.asarray(t_grid, dtype=float)

    def initial(eta0: float, n0: int) -> np.ndarray:
        return np.concatenate([[eta0**j for j in range(1, mm + 1)], [n0, eta0 * n0, n0 * n0]])

    ye = rk4_integrate(_esep_rhs(pe.jump, pe.expire_rate, pe.baseline, mm), initial(pe.intensity0, pe.n0),
                       t_grid, max_step)
    yh = rk4_integrate(_hawkes_rhs(ph.jump, ph.decay_rate, ph.baseline, mm), initial(ph.intensity0, ph.n0),
                       t_grid, max_step)
    return MomentTrajectories(t_grid, ye[:, :m] if m >= 2 else ye[:, :1], yh[:, :m] if m >= 2 else yh[:, :1],
                              ye[:, [mm, mm + 2]], yh[:, [mm, mm + 2]])


# ---------------------------------------------------------------------------
# paired-arrival (batch size 2) steady state


def gesep2_steady_mgf(p: ModelParams, theta: float, strict: bool = True) -> TransformResult:
    """Steady MGF of the queue of a 2-GESEP with exponential durations and pair arrivals.

    Arrivals come at rate baseline + (jump/2) Q and each brings two
    entities, each leaving at rate ``expire_rate``.
    """
    p = _esep(p, need_stable=True)
    a, b, base = p.jump, p.expire_rate, p.baseline
    if a == 0:
        # pairs arrive as a Poisson stream; each member of a pair survives Exp(b)
        w = math.expm1(theta)
        return TransformResult(math.exp(base / b * (2 * w + w * w / 2)), theta, True, math.inf)
    kappa = math.sqrt(a / (a + 8 * b))
    et = math.exp(theta)
    arg = (2 * et + 1) * kappa
    den = 2 * b - a * (et + et * et)
    # both constraints fail together at the same theta; report the tighter one
    bound = math.log((-1 + math.sqrt(1 + 8 * b / a)) / 2)
    if not (abs(arg) < 1 and den > _DENOM_EPS):
        return _fail(strict, f"theta={theta} outside the domain theta < {bound}", theta, bound)
    expo = 2 * base / math.sqrt(a * (a + 8 * b)) * (math.atanh(arg) - math.atanh(3 * kappa))
    value = math.exp(expo) * ((2 * b - 2 * a) / den) ** (base / a)
    return TransformResult(value, theta, True, bound)
