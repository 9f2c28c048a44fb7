"""Scaling experiments and closed-form limit objects.

Covers batch scaling of the n-GESEP toward a marked Hawkes process, SIS
convergence to the ESEP, the HESEP law of large numbers, and the HESEP
fluid and diffusion limits. HESEP parameters use ``baseline`` (nu*),
``jump`` (alpha), ``decay_rate`` (beta) and ``expire_rate`` (mu).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analytics import TransformResult, esep_steady_negbin
from .core import ESEP, HAWKES, HESEP, NGESEP, SIS, ModelParams, RngStreamSpec, burn_in, validate_params
from .errors import Unstable, ValidationError
from .laws import KernelSpec, Law
from .numerics import histogram, ks_statistic, tv_distance, variance_and_se
from .simulators import sample_states, simulate_hesep, steady_samples

_ROW_FIELDS = ("scale", "metric", "value", "samples", "seed")


@dataclass(frozen=True)
class SweepReport:
    """Rows of (scale, metric_name, metric_value, samples, seed), sorted by scale."""

    rows: tuple[tuple[float, str, float, int, int | None], ...]
    monotone_expected: bool
    config: dict = field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows, monotone_expected: bool, config: dict | None = None) -> SweepReport:
        rows = [(float(s), str(m), float(v), int(n), None if seed is None else int(seed)) for s, m, v, n, seed in rows]
        if any(r[3] <= 0 for r in rows):
            raise ValidationError("every row needs a positive sample count")
        rows.sort(key=lambda r: r[0])
        return cls(tuple(rows), monotone_expected, dict(config or {}))

    def metric(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        sel = [r for r in self.rows if r[1] == name]
        return np.array([r[0] for r in sel]), np.array([r[2] for r in sel])

    def value(self, name: str, scale: float) -> float:
        for r in self.rows:
            if r[1] == name and r[0] == scale:
                return r[2]
        raise KeyError((name, scale))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_ROW_FIELDS)
        for s, m, v, n, seed in self.rows:
            w.writerow([repr(s), m, repr(v), n, "" if seed is None else seed])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, monotone_expected: bool, config: dict | None = None) -> SweepReport:
        rd = csv.reader(io.StringIO(text))
        if tuple(next(rd)) != _ROW_FIELDS:
            raise ValidationError("unexpected sweep CSV header")
        rows = [(float(s), m, float(v), int(n), int(seed) if seed else None) for s, m, v, n, seed in rd]
        return cls.from_rows(rows, monotone_expected, config)

    def to_json(self) -> str:
        return json.dumps({"monotone_expected": self.monotone_expected, "config": self.config,
                           "rows": [dict(zip(_ROW_FIELDS, r)) for r in self.rows]}, indent=2, sort_keys=True)


def monotone_within(values, ses, k: float = 2.0) -> bool:
    """True when no step up exceeds ``k`` combined standard errors."""
    v, s = np.asarray(values, float), np.asarray(ses, float)
    return bool(np.all(np.diff(v) <= k * np.sqrt(s[1:] ** 2 + s[:-1] ** 2)))


# ---------------------------------------------------------------------------
# batch scaling: n-GESEP toward a marked Hawkes process


def matched_hawkes(p: ModelParams, batch: str = "deterministic") -> tuple[ModelParams, KernelSpec]:
    """Hawkes limit of the n-GESEP: kernel = duration tail, marks = limit of jump*B/n."""
    if p.duration_law is None:
        raise ValidationError("batch scaling needs a duration_law")
    if batch == "deterministic":
        mark = Law.deterministic(p.jump)
    elif batch == "geometric":
        mark = Law.exponential(1.0 / p.jump)
    else:
        raise ValidationError(f"unknown batch family {batch!r}")
    kernel = KernelSpec.tail_of_duration(p.duration_law, mark)
    return ModelParams(baseline=p.baseline, jump=p.jump, decay_rate=1.0 / p.duration_law.mean()), kernel


def batch_law_for(n: int, batch: str) -> Law:
    return Law.deterministic_int(n) if batch == "deterministic" else Law.geometric_mean(float(n))


def _ngesep_burn(p: ModelParams, n: int) -> float:
    rho = p.jump * p.batch_law.mean() * p.duration_law.mean() / n
    if rho >= 1:
        raise Unstable("n-GESEP needs jump * E[B] * E[G] / n < 1")
    return 20.0 * p.duration_law.mean() / (1.0 - rho)


def batch_scaling_sweep(p: ModelParams, n_list, replications: int, rng: RngStreamSpec,
                        batch: str = "deterministic", threads: int | None = None) -> SweepReport:
    """Two-sample KS distance between steady n-GESEP and matched Hawkes intensities, per n.

    Each n uses its own child streams; the Hawkes reference sample is
    drawn once and shared across n.
    """
    hp, kernel = matched_hawkes(p, batch)
    ns = sorted(int(n) for n in n_list)
    burns = []
    for n in ns:
        pn = p.with_(batch_law=batch_law_for(n, batch))
        validate_params(pn, NGESEP, n)
        burns.append(_ngesep_burn(pn, n))
    horizon = max(burns)
    if kernel.branching_ratio() >= 1:
        raise Unstable("matched Hawkes kernel is not subcritical")
    ref = sample_states(HAWKES, hp, [horizon], replications, rng.child(0), kernel=kernel, threads=threads)
    ref = ref["intensity"][:, 0]
    rows = []
    for n in ns:
        pn = p.with_(batch_law=batch_law_for(n, batch))
        s = sample_states(NGESEP, pn, [horizon], replications, rng.child(n), n=n, threads=threads)
        rows.append((n, "ks", ks_statistic(s["intensity"][:, 0], ref), replications, rng.seed))
    return SweepReport.from_rows(rows, True, {"batch": batch, "horizon": horizon})


def convergence_slope(report: SweepReport, metric: str = "ks") -> float:
    """Least-squares slope of log(metric) against log(scale); reported, never asserted."""
    s, v = report.metric(metric)
    return float(np.polyfit(np.log(s), np.log(v), 1)[0])


# ---------------------------------------------------------------------------
# SIS convergence


def _tv_to_pmf(values, pmf: np.ndarray) -> float:
    h = histogram(values)
    m = max(h.size, pmf.size)
    a, b = np.zeros(m), np.zeros(m)
    a[: h.size], b[: pmf.size] = h, pmf
    return tv_distance(a, b)


def bootstrap_tv_se(values, pmf: np.ndarray, rng: np.random.Generator, rounds: int = 200) -> float:
    h = histogram(values)
    n = int(h.sum())
    draws = [_tv_to_pmf(np.repeat(np.arange(h.size), rng.multinomial(n, h / n)), pmf) for _ in range(rounds)]
    return float(np.std(draws, ddof=1))


def sis_convergence_sweep(p: ModelParams, N_list, replications: int, rng: RngStreamSpec,
                          threads: int | None = None, burn: float | None = None) -> SweepReport:
    """TV distance between the steady SIS infected count and the ESEP negative binomial, per population N.

    Rows carry ``tv`` and its bootstrap standard error ``tv_se``.
    """
    law = esep_steady_negbin(p.with_(population=None))
    pmf = np.append(law.probs, law.truncation_mass)
    burn = burn_in(p) if burn is None else burn
    rows = []
    for N in sorted(int(x) for x in N_list):
        pn = p.with_(population=N)
        s = steady_samples(SIS, pn, replications, rng.child(N), burn=burn, threads=threads)["Q"]
        tv = _tv_to_pmf(s, pmf)
        se = bootstrap_tv_se(s, pmf, rng.child(N).child(1).generator())
        rows += [(N, "tv", tv, replications, rng.seed), (N, "tv_se", se, replications, rng.seed)]
    return SweepReport.from_rows(rows, True, {"burn": burn})


def sis_truncated_stationary(p: ModelParams) -> np.ndarray:
    """Exact stationary law of the finite-population SIS chain by detailed balance."""
    pv = validate_params(p, SIS)
    N = pv.population
    q = np.arange(N)
    up = (pv.baseline + pv.jump * q) * (N - q) / N
    down = pv.expire_rate * (q + 1)
    logw = np.concatenate([[0.0], np.cumsum(np.log(up) - np.log(down))])
    w = np.exp(logw - logw.max())
    return w / w.sum()


# ---------------------------------------------------------------------------
# HESEP law of large numbers


def hesep_mean_rate(p: ModelParams) -> float:
    """nu_inf = (mu + beta) nu* / (mu + beta - alpha)."""
    c = p.expire_rate + p.decay_rate
    if not c > p.jump:
        raise Unstable("HESEP needs expire_rate + decay_rate > jump")
    return c * p.baseline / (c - p.jump)


def renewal_check(p: ModelParams, t_list, rng: RngStreamSpec) -> SweepReport:
    """Relative error of N_t/t against nu_inf, and of the mean inter-arrival time against 1/nu_inf.

    One path runs to the largest t and is read at every t in ``t_list``.
    """
    p = validate_params(p, HESEP)
    nu_inf = hesep_mean_rate(p)
    ts = sorted(float(t) for t in t_list)
    path = simulate_hesep(p, ts[-1], rng)
    arr = path.arrival_times()
    rows = []
    for t in ts:
        k = int(np.searchsorted(arr, t, side="right"))
        rows.append((t, "relative_error", abs((p.n0 + k) / t - nu_inf) / nu_inf, 1, rng.seed))
        if k > 0:
            rows.append((t, "interarrival_relative_error", abs(arr[k - 1] / k * nu_inf - 1.0), k, rng.seed))
    return SweepReport.from_rows(rows, True, {"nu_inf": nu_inf})


# ---------------------------------------------------------------------------
# fluid limit


def fluid_means(p: ModelParams, t: float, nu0: float | None = None, q0: float | None = None) -> tuple[float, float]:
    """Fluid-scale (E[nu_t], E[Q_t]) from the characteristic solution.

    Defaults take the initial state from ``p`` (``intensity0`` and ``q0``).
    """
    p = validate_params(p, HESEP)
    if not p.expire_rate > 0:
        raise ValidationError("fluid limit needs a positive expire_rate")
    mu, d = p.expire_rate, p.decay_rate - p.jump
    c = mu + d
    nu_inf = hesep_mean_rate(p)
    nu0 = p.intensity0 if nu0 is None else nu0
    q0 = p.q0 if q0 is None else q0
    e_mu, e_c = math.exp(-mu * t), math.exp(-c * t)
    m_nu = nu0 * e_c + nu_inf * (1 - e_c)
    if d != 0:
        m_q = (q0 * e_mu + nu0 * (e_mu - e_c) / d - nu_inf * (1 - e_c) / d
               + nu_inf * c * (1 - e_mu) / (mu * d))
    else:
        m_q = q0 * e_mu + nu0 * t * e_mu + nu_inf * t * (1 - e_mu) - nu_inf / mu * (mu * t - 1 + e_mu)
    return m_nu, m_q


def fluid_limit_mgf(p: ModelParams, theta_nu: float, theta_q: float, t: float) -> TransformResult:
    """Limit of E[exp(theta_nu nu_t(n)/n + theta_q Q_t(n)/n)] under baseline scaling n."""
    m_nu, m_q = fluid_means(p, t)
    return TransformResult(math.exp(theta_nu * m_nu + theta_q * m_q), (theta_nu, theta_q), True)


# ---------------------------------------------------------------------------
# diffusion bracket


# below this relative gap the 1/(beta-alpha)^2 terms cancel worse than the
# equal-rate formulas approximate (both errors are a few 1e-6 at the switch)
_EQUAL_RATE_GAP = 1e-5


def _equal_rates(a: float, b: float, mu: float) -> bool:
    return abs(b - a) <= _EQUAL_RATE_GAP * max(a, b, mu)


@dataclass(frozen=True)
class DiffusionBound:
    """Gaussian diffusion approximation indexed by gamma in [0, 1].

    gamma = 0 and gamma = 1 give the lower and upper bounds of the limiting
    MGF of the centred, sqrt(n)-scaled HESEP; values in between interpolate.
    """

    gamma: float
    baseline: float
    jump: float
    decay: float
    service: float

    @property
    def nu_inf(self) -> float:
        c = self.service + self.decay
        return c * self.baseline / (c - self.jump)

    @property
    def excess(self) -> float:
        """nu_inf - nu*, written so that it cannot round below zero."""
        c = self.service + self.decay
        return self.jump * self.baseline / (c - self.jump)

    @property
    def mean(self) -> tuple[float, float]:
        return self.nu_inf, self.nu_inf / self.service

    @property
    def sigma2_nu(self) -> float:
        a, b, mu, g = self.jump, self.decay, self.service, self.gamma
        ninf, gap = self.nu_inf, self.excess
        return (g * a * mu * gap + a * a * ninf) / (2 * (mu + b - a))

    @property
    def sigma2_q(self) -> float:
        a, b, mu, g = self.jump, self.decay, self.service, self.gamma
        ninf, gap = self.nu_inf, self.excess
        if _equal_rates(a, b, mu):
            return ((1 / (2 * mu) + g * a / (4 * mu**2)) * gap
                    + (1 / mu + a / (2 * mu**2) + a * a / (4 * mu**3)) * ninf)
        d = b - a
        return ((g * a * mu * gap + a * a * ninf) / (2 * d * d * (mu + d))
                - ((2 * g * a * mu + 2 * mu * d) * gap + 2 * a * b * ninf) / (d * d * (2 * mu + d))
                + (g * a * mu * gap + ninf * b * b) / (2 * mu * d * d)
                + gap / d + ninf / (2 * mu))

    def log_mgf(self, theta_nu: float, theta_q: float, t: float, nu0: float = 0.0, q0: float = 0.0) -> float:
        """log B_gamma(t, theta_nu, theta_q) for centred, scaled initial values (nu0, q0)."""
        a, b, mu, g = self.jump, self.decay, self.service, self.gamma
        ninf, gap = self.nu_inf, self.excess
        tn, tq = theta_nu, theta_q
        if not _equal_rates(a, b, mu):
            d = b - a
            c = mu + d
            out = nu0 * tn * math.exp(-c * t) + nu0 * tq / d * (math.exp(-mu * t) - math.exp(-c * t))
            out += q0 * tq * math.exp(-mu * t)
            out += ((tn - tq / d) ** 2 * (g * a * mu * gap / 2 + a * a * ninf / 2)
                    * -math.expm1(-2 * c * t) / (2 * c))
            out += ((tn * tq - tq * tq / d) * ((g * a * mu / d + mu) * gap + a * b * ninf / d)
                    * -math.expm1(-(2 * mu + d) * t) / (2 * mu + d))
            out += (tq * tq * (g * a * mu * gap / (2 * d * d) + mu * gap / d + ninf / 2 + ninf * b * b / (2 * d * d))
                    * -math.expm1(-2 * mu * t) / (2 * mu))
            return out
        e2 = math.exp(-2 * mu * t)
        one = -math.expm1(-2 * mu * t)
        lin = (2 * mu * t - 1 + e2) / (4 * mu)
        quad = (2 * mu * t * (mu * t - 1) + 1 - e2) / (4 * mu * mu)
        out = nu0 * tn * math.exp(-mu * t) + nu0 * tq * t * math.exp(-mu * t) + q0 * tq * math.exp(-mu * t)
        out += ((g * a * (tn + tq * t) ** 2 / 2 + tn * tq + tq * tq * t) * one / 2
                - (g * a * (tn * tq + tq * tq * t) + tq * tq) * lin
                + g * a * tq * tq / 2 * quad) * gap
        out += ninf / 2 * ((tq * tq + (tq + a * tn) ** 2 + 2 * (a * a * tn * tq + a * tq * tq) * t
                            + a * a * tq * tq * t * t) * one / (2 * mu)
                           - 2 * (a * a * tn * tq + a * tq * tq + a * a * tq * tq * t) * lin / mu
                           + a * a * tq * tq * quad / mu)
        return out

    def mgf(self, theta_nu: float, theta_q: float, t: float, nu0: float = 0.0, q0: float = 0.0) -> float:
        return math.exp(self.log_mgf(theta_nu, theta_q, t, nu0, q0))


def diffusion_bound(p: ModelParams, gamma: float) -> DiffusionBound:
    p = validate_params(p, HESEP)
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError("gamma must lie in [0, 1]")
    if not p.expire_rate > 0:
        raise ValidationError("diffusion bound needs a positive expire_rate")
    if not p.stable:
        raise Unstable("HESEP needs expire_rate + decay_rate > jump")
    return DiffusionBound(float(gamma), p.baseline, p.jump, p.decay_rate, p.expire_rate)


def ratio_gamma(p: ModelParams) -> float:
    """The interpolating choice gamma = mu / (mu + beta)."""
    return p.expire_rate / (p.expire_rate + p.decay_rate)


def hesep_scaled_samples(p: ModelParams, n: int, samples: int, rng: RngStreamSpec, paths: int = 8,
                         spacing: float = 1.0, threads: int | None = None) -> np.ndarray:
    """Steady draws of (nu - n nu_inf)/sqrt(n) for baseline n*nu*.

    ``paths`` independent paths each pass a burn-in and are then read every
    ``spacing`` time units.
    """
    pn = p.with_(baseline=p.baseline * n, q0=0, intensity0=None)
    per = -(-samples // paths)
    burn = burn_in(pn)
    obs = burn + spacing * np.arange(per)
    nu = sample_states(HESEP, pn, obs, paths, rng, threads=threads)["intensity"]
    return ((nu - n * hesep_mean_rate(p)) / math.sqrt(n)).ravel()[:samples]


def diffusion_fit_check(p: ModelParams, n_list, gamma_list, replications: int, rng: RngStreamSpec,
                        paths: int = 8, spacing: float = 1.0, threads: int | None = None) -> SweepReport:
    """Empirical scaled steady variance of nu against sigma2_nu(gamma), per scale n.

    Rows: ``variance`` (with ``variance_se`` from between-path spread),
    ``sigma2_nu_gamma=<g>`` for each gamma, and ``relative_gap_ratio_gamma``
    measured against gamma = mu/(mu+beta).
    """
    p = validate_params(p, HESEP)
    rows = []
    target = diffusion_bound(p, ratio_gamma(p)).sigma2_nu
    for n in sorted(int(x) for x in n_list):
        x = hesep_scaled_samples(p, n, replications, rng.child(n), paths, spacing, threads)
        per_path = x.reshape(paths, -1) if x.size % paths == 0 else None
        var = float(np.var(x, ddof=1))
        se = (float(np.std(per_path.var(axis=1, ddof=1), ddof=1) / math.sqrt(paths))
              if per_path is not None else variance_and_se(x)[1])
        rows += [(n, "variance", var, x.size, rng.seed), (n, "variance_se", se, x.size, rng.seed)]
        for g in gamma_list:
            rows.append((n, f"sigma2_nu_gamma={float(g):g}", diffusion_bound(p, g).sigma2_nu, x.size, rng.seed))
        rows.append((n, "relative_gap_ratio_gamma", abs(var - target) / target, x.size, rng.seed))
    return SweepReport.from_rows(rows, False)


# ---------------------------------------------------------------------------
# ESEP / HESEP / Hawkes sandwich


@dataclass(frozen=True)
class SandwichStats:
    """Per-time variances (and SEs) of intensity and count, plus intensity-count covariances."""

    t: np.ndarray
    variance: dict[str, np.ndarray]
    variance_se: dict[str, np.ndarray]
    count_variance: dict[str, np.ndarray]
    count_variance_se: dict[str, np.ndarray]
    covariance: dict[str, np.ndarray]
    covariance_se: dict[str, np.ndarray]
    mean: dict[str, np.ndarray]


def sandwich_params(p: ModelParams) -> dict[str, ModelParams]:
    """Hawkes, HESEP and ESEP with equal means: the outer two use rate mu + beta."""
    c = p.expire_rate + p.decay_rate
    return {
        HAWKES: ModelParams(baseline=p.baseline, jump=p.jump, decay_rate=c),
        HESEP: ModelParams(baseline=p.baseline, jump=p.jump, decay_rate=p.decay_rate, expire_rate=p.expire_rate),
        ESEP: ModelParams(baseline=p.baseline, jump=p.jump, expire_rate=c),
    }


def _cov_and_se(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    n = x.size
    prod = (x - x.mean()) * (y - y.mean())
    return float(prod.sum() / (n - 1)), float(prod.std(ddof=1) / math.sqrt(n))


def sandwich_stats(p: ModelParams, t_list, replications: int, rng: RngStreamSpec,
                   threads: int | None = None) -> SandwichStats:
    ts = np.sort(np.asarray(t_list, dtype=float))
    var, vse, cvar, cvse, cov, cse, mean = {}, {}, {}, {}, {}, {}, {}
    for i, (model, mp) in enumerate(sandwich_params(p).items()):
        s = sample_states(model, mp, ts, replications, rng.child(i), threads=threads)
        lam, cnt = s["intensity"].astype(float), s["N"].astype(float)
        vv = [variance_and_se(lam[:, j]) for j in range(ts.size)]
        cv = [variance_and_se(cnt[:, j]) for j in range(ts.size)]
        co = [_cov_and_se(lam[:, j], cnt[:, j]) for j in range(ts.size)]
        var[model], vse[model] = np.array([v[0] for v in vv]), np.array([v[1] for v in vv])
        cvar[model], cvse[model] = np.array([v[0] for v in cv]), np.array([v[1] for v in cv])
        cov[model], cse[model] = np.array([v[0] for v in co]), np.array([v[1] for v in co])
        mean[model] = lam.mean(axis=0)
    return SandwichStats(ts, var, vse, cvar, cvse, cov, cse, mean)


def ordered_within(lo: np.ndarray, lo_se: np.ndarray, hi: np.ndarray, hi_se: np.ndarray, k: float = 3.0) -> bool:
    """One-sided check lo <= hi, failing only when lo exceeds hi by more than k combined SEs."""
    return bool(np.all(lo - hi <= k * np.sqrt(lo_se**2 + hi_se**2)))
