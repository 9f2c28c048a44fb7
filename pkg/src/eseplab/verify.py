"""Claim checks: each pairs a sample generator with an analytic oracle and a statistic.

A :class:`ClaimSpec` names a registered generator, a registered oracle and
one of the statistics below; :func:`run_claim` evaluates it
deterministically from the claim's seed and stream id.

Statistics and their pass directions:

* ``TV``, ``KS``: distance below the tolerance;
* ``chi2``: p-value above the tolerance;
* ``moment-z``: largest |estimate - reference| / SE at most the tolerance;
* ``one-sided-order``: largest (lo - hi) / SE at most the tolerance, where a
  zero SE leaves the difference in raw units (deterministic orderings);
* ``abs-error`` and ``relative-error``: largest deviation at most the tolerance.
"""

from __future__ import annotations

import json
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable

import numpy as np

from . import analytics as an
from . import blocking as bl
from . import branching as br
from . import limits as lm
from .core import ESEP, ESEP_B, HAWKES, SIS, ModelParams, RngStreamSpec
from .errors import DuplicateClaim, UnknownClaim, ValidationError
from .laws import Law
from .numerics import chi_square, histogram, ks_statistic, tv_distance
from .simulators import sample_clusters, sample_states, steady_samples

STATISTICS = ("TV", "KS", "chi2", "moment-z", "one-sided-order", "abs-error", "relative-error")
MASTER_SEED = 20240611
_RERUN_OFFSET = 0x9E3779B97F4A7C15


def rerun_seed(seed: int) -> int:
    """The documented second seed used when a claim is retried once."""
    return (seed + _RERUN_OFFSET) % 2**64


@dataclass(frozen=True)
class ClaimSpec:
    claim_id: str
    generator: str
    oracle: str
    statistic: str
    tolerance: float
    replications: int
    seed: int = MASTER_SEED
    stream_id: int = 0
    params: dict = field(default_factory=dict)
    rationale: str = ""

    def __post_init__(self):
        if self.statistic not in STATISTICS:
            raise ValidationError(f"unknown statistic {self.statistic!r}")
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be positive")
        if self.replications < 1:
            raise ValidationError("replications must be positive")

    def rng(self, seed: int | None = None) -> RngStreamSpec:
        return RngStreamSpec(self.seed if seed is None else seed, self.stream_id)


@dataclass(frozen=True)
class ClaimReport:
    claim_id: str
    observed: float
    threshold: float
    passed: bool
    runtime: float
    seed: int
    statistic: str = ""
    rerun: bool = False
    first_observed: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = " (after rerun)" if self.rerun else ""
        return f"{tag} {self.claim_id}: {self.statistic} observed={self.observed:.6g} threshold={self.threshold:.6g}{extra}"


def reports_to_json(reports: list[ClaimReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# registries

GENERATORS: dict[str, Callable] = {}
ORACLES: dict[str, Callable] = {}

_cache: dict = {}
_cache_lock = threading.Lock()


def generator(name: str):
    def deco(fn):
        GENERATORS[name] = fn
        return fn
    return deco


def oracle(name: str):
    def deco(fn):
        ORACLES[name] = fn
        return fn
    return deco


def clear_cache() -> None:
    with _cache_lock:
        _cache.clear()


def _memo(key, fn):
    """Share one simulation among claims that read it differently (results are seed-determined)."""
    with _cache_lock:
        if key in _cache:
            return _cache[key]
    val = fn()
    with _cache_lock:
        _cache.setdefault(key, val)
        return _cache[key]


def _key(name: str, params: dict, reps: int, rng: RngStreamSpec) -> tuple:
    return name, json.dumps(params, sort_keys=True), reps, rng


def _esep(params: dict, **extra) -> ModelParams:
    return ModelParams(baseline=params["baseline"], jump=params["jump"], expire_rate=params["rate"],
                       q0=params.get("q0", 0), **extra)


def _hawkes(params: dict) -> ModelParams:
    return ModelParams(baseline=params["baseline"], jump=params["jump"], decay_rate=params["rate"])


def _hesep(params: dict) -> ModelParams:
    return ModelParams(baseline=params["baseline"], jump=params["jump"], decay_rate=params["decay"],
                       expire_rate=params["service"])


def _stacked(est, se) -> tuple[np.ndarray, np.ndarray]:
    return np.atleast_1d(np.asarray(est, float)), np.atleast_1d(np.asarray(se, float))


def _order(lo, lo_se, hi, hi_se):
    return tuple(np.atleast_1d(np.asarray(x, float)) for x in (lo, lo_se, hi, hi_se))


# ---------------------------------------------------------------------------
# steady state and moments


@generator("esep_steady_queue")
def _g_steady(params, reps, rng, threads):
    return steady_samples(ESEP, _esep(params), reps, rng, threads=threads)["Q"]


@oracle("negbin_pmf")
def _o_negbin(params):
    t = an.esep_steady_negbin(_esep(params))
    return np.append(t.probs, t.truncation_mass)


@oracle("negbin_pmf_swapped")
def _o_negbin_swapped(params):
    # negative control: success probability 1 - jump/rate instead of jump/rate
    prob = 1.0 - params["jump"] / params["rate"]
    k = np.arange(400)
    return np.exp(an.negbin_log_pmf(k, params["baseline"] / params["jump"], prob))


def _pair_at_t(params, reps, rng, threads):
    def run():
        t = params["t"]
        e = sample_states(ESEP, _esep(params), [t], reps, rng.child(0), threads=threads)["intensity"][:, 0]
        h = sample_states(HAWKES, _hawkes(params), [t], reps, rng.child(1), threads=threads)["intensity"][:, 0]
        return e.astype(float), h.astype(float)
    return _memo(_key("pair_at_t", params, reps, rng), run)


@generator("intensity_mean_difference")
def _g_mean_diff(params, reps, rng, threads):
    e, h = _pair_at_t(params, reps, rng, threads)
    se = math.sqrt(e.var(ddof=1) / e.size + h.var(ddof=1) / h.size)
    return _stacked(e.mean() - h.mean(), se)


@generator("intensity_variance_pair")
def _g_var_pair(params, reps, rng, threads):
    from .numerics import variance_and_se

    e, h = _pair_at_t(params, reps, rng, threads)
    ve, se_e = variance_and_se(e)
    vh, se_h = variance_and_se(h)
    return _order(vh, se_h, ve, se_e)


def _odes(params):
    grid = np.linspace(0.0, params["t"], 11)
    return an.moment_odes(_esep(params), _hawkes(params), 2, grid)


@generator("ode_mean_difference")
def _g_ode_mean(params, reps, rng, threads):
    tr = _odes(params)
    return tr.esep_intensity[:, 0] - tr.hawkes_intensity[:, 0]


@generator("ode_variance_pair")
def _g_ode_var(params, reps, rng, threads):
    tr = _odes(params)
    z = np.zeros(tr.t.size)
    return _order(tr.hawkes_intensity_variance, z, tr.esep_intensity_variance, z)


@oracle("zero")
def _o_zero(params):
    return 0.0


@oracle("none")
def _o_none(params):
    return None


# ---------------------------------------------------------------------------
# transient transforms and the counting PMF


def _transient(params, reps, rng, threads):
    def run():
        s = sample_states(ESEP, _esep(params), params["times"], reps, rng, threads=threads)
        return {k: s[k].astype(np.int32) for k in ("Q", "N", "D")}
    sim = {k: params[k] for k in ("baseline", "jump", "rate", "q0", "times")}
    return _memo(_key("transient", sim, reps, rng), run)


def _mc_mean(values: np.ndarray) -> tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


@generator("transient_transforms")
def _g_transient(params, reps, rng, threads):
    s = _transient(params, reps, rng, threads)
    p = _esep(params)
    est, se = [], []
    for j, _t in enumerate(params["times"]):
        q, n, d = s["Q"][:, j], s["N"][:, j], s["D"][:, j]
        for arg in params["grid"]:
            if params["which"] == "intensity_mgf":
                v = np.exp(arg * (p.baseline + p.jump * q))
            elif params["which"] == "counting_pgf":
                v = np.power(float(arg), n)
            else:
                v = np.power(float(arg[0]), q) * np.power(float(arg[1]), d)
            m, e = _mc_mean(v)
            est.append(m)
            se.append(e)
    return _stacked(est, se)


@oracle("transient_transform_values")
def _o_transient(params):
    p = _esep(params)
    out = []
    for t in params["times"]:
        for arg in params["grid"]:
            if params["which"] == "intensity_mgf":
                out.append(an.esep_transient_mgf(p, arg, t).value)
            elif params["which"] == "counting_pgf":
                out.append(an.esep_counting_pgf(p, arg, t).value)
            else:
                out.append(an.joint_qd_pgf(p, arg[0], arg[1], t).value)
    return np.array(out)


@generator("counting_histogram")
def _g_count_hist(params, reps, rng, threads):
    s = _transient(params, reps, rng, threads)
    est, se = [], []
    for t in params["pmf_times"]:
        j = params["times"].index(t)
        h = np.bincount(s["N"][:, j], minlength=params["n_max"] + 1)[: params["n_max"] + 1] / reps
        est.extend(h)
        # binomial SE, floored at one count so empty cells still carry an error bar
        se.extend(np.sqrt(np.maximum(h * (1 - h), 1.0 / reps) / reps))
    return _stacked(est, se)


@generator("matrix_pmf_values")
@oracle("matrix_pmf_values")
def _o_matrix(params, *_args):
    p = _esep(params)
    return np.array([an.counting_pmf_matrix(p, n, t) for t in params["pmf_times"] for n in range(params["n_max"] + 1)])


@oracle("series_pmf_values")
def _o_series(params):
    p = _esep(params)
    return np.concatenate([an.counting_pmf_series(p, t, params["n_max"]) for t in params["pmf_times"]])


# ---------------------------------------------------------------------------
# clusters


def _clusters(params, reps, rng, threads):
    p = _esep(params) if params["model"] == ESEP else _hawkes(params)
    return _memo(_key("clusters", params, reps, rng),
                 lambda: sample_clusters(p, params["model"], reps, rng, threads))


@generator("cluster_progeny")
def _g_progeny(params, reps, rng, threads):
    return _clusters(params, reps, rng, threads)[0]


@generator("cluster_generations")
def _g_generations(params, reps, rng, threads):
    return _clusters(params, reps, rng, threads)[1]


@generator("cluster_progeny_mean")
def _g_progeny_mean(params, reps, rng, threads):
    tot = _clusters(params, reps, rng, threads)[0].astype(float)
    return _stacked(*_mc_mean(tot))


def _cluster_params(params) -> ModelParams:
    return _esep(params) if params["model"] == ESEP else _hawkes(params)


@oracle("progeny_pmf")
def _o_progeny(params):
    law = br.progeny_law(_cluster_params(params), params["model"])
    return np.concatenate([[0.0], law.probs])


@oracle("progeny_mean")
def _o_progeny_mean(params):
    return br.progeny_law(_cluster_params(params), params["model"]).mean


@oracle("generations_pmf")
def _o_generations(params):
    p = _cluster_params(params)
    law = br.generations_law_esep(p) if params["model"] == ESEP else br.generations_law_hawkes(p)
    return np.concatenate([[0.0], law.probs])


# ---------------------------------------------------------------------------
# family decomposition


@generator("compound_pgf_values")
def _g_compound(params, reps, rng, threads):
    p = _esep(params)
    return np.array([br.compound_poisson_logarithmic_pgf(p, z) for z in params["z"]])


@oracle("negbin_pgf_values")
def _o_negbin_pgf(params):
    p = _esep(params)
    return np.array([an.negbin_pgf(p, z) for z in params["z"]])


# ---------------------------------------------------------------------------
# SIS convergence


def _sis(params, reps, rng, threads):
    base = _esep(params)
    return _memo(_key("sis", params, reps, rng),
                 lambda: lm.sis_convergence_sweep(base, params["populations"], reps, rng, threads=threads))


@generator("sis_tv_largest")
def _g_sis_last(params, reps, rng, threads):
    rep = _sis(params, reps, rng, threads)
    _, tv = rep.metric("tv")
    return np.array([tv[-1]])


@generator("sis_tv_steps")
def _g_sis_steps(params, reps, rng, threads):
    rep = _sis(params, reps, rng, threads)
    _, tv = rep.metric("tv")
    _, se = rep.metric("tv_se")
    return _order(tv[1:], se[1:], tv[:-1], se[:-1])


# ---------------------------------------------------------------------------
# batch scaling


def _batch(params, reps, rng, threads):
    p = ModelParams(baseline=params["baseline"], jump=params["jump"],
                    duration_law=Law.exponential(params["service"]))
    return _memo(_key("batch", params, reps, rng),
                 lambda: lm.batch_scaling_sweep(p, params["n_list"], reps, rng, params.get("batch", "deterministic"),
                                                threads=threads))


@generator("batch_ks_largest")
def _g_batch_last(params, reps, rng, threads):
    _, ks = _batch(params, reps, rng, threads).metric("ks")
    return ks[-1]


@generator("batch_ks_first_last")
def _g_batch_pair(params, reps, rng, threads):
    _, ks = _batch(params, reps, rng, threads).metric("ks")
    return _order(ks[-1], 0.0, ks[0], 0.0)


# ---------------------------------------------------------------------------
# HESEP sandwich and limits


@generator("sandwich_variance_pairs")
def _g_sandwich(params, reps, rng, threads):
    st = lm.sandwich_stats(_hesep(params), params["times"], reps, rng, threads)
    v, s = st.variance, st.variance_se
    lo = np.concatenate([v[HAWKES], v["hesep"]])
    lo_se = np.concatenate([s[HAWKES], s["hesep"]])
    hi = np.concatenate([v["hesep"], v[ESEP]])
    hi_se = np.concatenate([s["hesep"], s[ESEP]])
    return _order(lo, lo_se, hi, hi_se)


@generator("renewal_rate")
def _g_renewal(params, reps, rng, threads):
    from .simulators import simulate_hesep

    p = _hesep(params)
    path = simulate_hesep(p, params["t"], rng)
    k = int(np.count_nonzero(path.arrival_times() <= params["t"]))
    return np.array([k / params["t"]])


@oracle("hesep_rate")
def _o_hesep_rate(params):
    return np.array([lm.hesep_mean_rate(_hesep(params))])


def _diffusion(params, reps, rng, threads):
    p = _hesep(params)
    return _memo(_key("diffusion", params, reps, rng),
                 lambda: lm.hesep_scaled_samples(p, params["scale"], reps, rng, params.get("paths", 8),
                                                 params.get("spacing", 1.0), threads))


@generator("diffusion_bracket")
def _g_bracket(params, reps, rng, threads):
    x = _diffusion(params, reps, rng, threads)
    v = float(np.var(x, ddof=1))
    p = _hesep(params)
    lo, hi = lm.diffusion_bound(p, 0.0).sigma2_nu, lm.diffusion_bound(p, 1.0).sigma2_nu
    return _order([lo, v], [0.0, 0.0], [v, hi], [0.0, 0.0])


@generator("diffusion_variance")
def _g_diff_var(params, reps, rng, threads):
    return np.array([float(np.var(_diffusion(params, reps, rng, threads), ddof=1))])


@oracle("diffusion_ratio_gamma_variance")
def _o_ratio_gamma(params):
    p = _hesep(params)
    return np.array([lm.diffusion_bound(p, lm.ratio_gamma(p)).sigma2_nu])


# ---------------------------------------------------------------------------
# blocking


def _blocking_grid(params):
    return [ModelParams(baseline=b, jump=a, expire_rate=r, capacity=c) for b, a, r, c in params["grid"]]


@generator("esepb_pmf_grid")
def _g_esepb_grid(params, reps, rng, threads):
    return np.concatenate([bl.esepb_steady(p).pmf.probs for p in _blocking_grid(params)])


@oracle("truncated_negbin_grid")
def _o_trunc_grid(params):
    out = []
    for p in _blocking_grid(params):
        k = np.arange(p.capacity + 1)
        w = np.exp(an.negbin_log_pmf(k, p.baseline / p.jump, p.jump / p.expire_rate))
        out.append(w / w.sum())
    return np.concatenate(out)


def _esepb(params) -> ModelParams:
    return ModelParams(baseline=params["baseline"], jump=params["jump"], expire_rate=params["rate"],
                       capacity=params["capacity"])


@generator("blocked_fraction_estimate")
def _g_blocked(params, reps, rng, threads):
    est = bl.simulated_blocking(_esepb(params), params["horizon"], rng, batches=params.get("batches", 50))
    return _stacked(est.block_fraction, est.block_fraction_se)


@oracle("blocking_fraction")
def _o_blocked(params):
    return bl.blocking_fraction(_esepb(params))


def _pasta(params):
    rep = bl.pasta_ratio_sweep(_esepb(params), params["n_list"])
    return rep.metric("pasta_ratio")[1]


@generator("pasta_ratio_largest")
def _g_pasta_last(params, reps, rng, threads):
    return np.array([_pasta(params)[-1]])


@generator("pasta_ratio_steps")
def _g_pasta_steps(params, reps, rng, threads):
    r = _pasta(params)
    z = np.zeros(r.size - 1)
    return _order(r[1:], z, r[:-1], z)


@oracle("one")
def _o_one(params):
    return np.array([1.0])


# ---------------------------------------------------------------------------
# statistics


def _stat(spec: ClaimSpec, sample, reference) -> float:
    s = spec.statistic
    if s == "TV":
        h = histogram(sample)
        ref = np.asarray(reference, float)
        m = max(h.size, ref.size)
        a, b = np.zeros(m), np.zeros(m)
        a[: h.size], b[: ref.size] = h, ref
        return tv_distance(a, b)
    if s == "KS":
        return float(sample) if np.ndim(sample) == 0 else ks_statistic(sample, None, reference)
    if s == "chi2":
        counts = histogram(sample)
        return chi_square(counts, reference)[1]
    if s == "moment-z":
        est, se = sample
        diff = np.abs(est - np.asarray(reference, float))
        return float(np.max(diff / se)) if np.all(se > 0) else float(np.max(diff))
    if s == "one-sided-order":
        lo, lo_se, hi, hi_se = sample
        comb = np.sqrt(lo_se**2 + hi_se**2)
        gap = lo - hi
        return float(np.max(np.where(comb > 0, gap / np.where(comb > 0, comb, 1.0), gap)))
    ref = np.asarray(reference, float)
    dev = np.abs(np.asarray(sample, float) - ref)
    if s == "relative-error":
        dev = dev / np.abs(ref)
    return float(np.max(dev))


def _passes(statistic: str, observed: float, tol: float) -> bool:
    if statistic in ("TV", "KS"):
        return observed < tol
    if statistic == "chi2":
        return observed > tol
    return observed <= tol


def run_claim(spec: ClaimSpec, threads: int | None = None, seed: int | None = None) -> ClaimReport:
    """Evaluate one claim; ``seed`` overrides the claim's seed (used for the documented rerun)."""
    if spec.generator not in GENERATORS:
        raise UnknownClaim(f"{spec.claim_id}: no generator named {spec.generator!r}")
    if spec.oracle not in ORACLES:
        raise UnknownClaim(f"{spec.claim_id}: no oracle named {spec.oracle!r}")
    used = spec.seed if seed is None else seed
    t0 = time.perf_counter()
    sample = GENERATORS[spec.generator](spec.params, spec.replications, spec.rng(used), threads)
    reference = ORACLES[spec.oracle](spec.params)
    observed = _stat(spec, sample, reference)
    return ClaimReport(spec.claim_id, observed, spec.tolerance, _passes(spec.statistic, observed, spec.tolerance),
                       time.perf_counter() - t0, used, spec.statistic)


def run_suite(suite: list[ClaimSpec], parallelism: int = 1, fail_fast: bool = False, rerun: bool = True,
              threads: int | None = None) -> list[ClaimReport]:
    """Run every claim, in suite order; a failed claim is retried once with :func:`rerun_seed`."""
    ids = [s.claim_id for s in suite]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise DuplicateClaim(f"duplicate claim ids: {sorted(dup)}")
    clear_cache()

    def one(spec: ClaimSpec) -> ClaimReport:
        rep = run_claim(spec, threads)
        if rep.passed or not rerun:
            return rep
        second = run_claim(spec, threads, seed=rerun_seed(spec.seed))
        return ClaimReport(second.claim_id, second.observed, second.threshold, second.passed,
                           rep.runtime + second.runtime, second.seed, second.statistic, True, rep.observed)

    out: list[ClaimReport] = []
    try:
        if parallelism <= 1:
            for spec in suite:
                out.append(one(spec))
                if fail_fast and not out[-1].passed:
                    break
        else:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                out = list(pool.map(one, suite))
    finally:
        clear_cache()
    return out


# ---------------------------------------------------------------------------
# suites

BASE = {"baseline": 10.0, "jump": 2.0, "rate": 3.0}


def _claim(claim_id, gen, orc, stat, tol, reps, stream, params, why, seed) -> ClaimSpec:
    return ClaimSpec(claim_id, gen, orc, stat, tol, reps, seed, stream, params, why)


def default_suite(seed: int = MASTER_SEED, scale: float = 1.0) -> list[ClaimSpec]:
    """One or more claims per acceptance row; ``scale`` shrinks replication counts for smoke runs."""

    def r(n: int) -> int:
        return max(1, int(round(n * scale)))

    transient = {**BASE, "q0": 2, "times": [0.5, 1.0, 2.0]}
    pmf_params = {**transient, "pmf_times": [0.5, 1.0], "n_max": 10}
    sandwich = {"baseline": 1.0, "jump": 2.0, "decay": 1.5, "service": 1.5, "times": [1.0, 5.0]}
    diff = {"baseline": 1.0, "jump": 3.0, "decay": 2.0, "service": 2.0, "paths": 64}
    grid = [[b, a, rt, c] for b, a, rt, c in
            [(5, 2, 3, 8), (5, 2, 3, 0), (5, 2, 3, 1), (5, 2, 3, 30), (10, 2, 3, 5), (10, 2, 3, 40),
             (1, 1, 2, 3), (1, 1, 2, 12), (0.5, 0.5, 3, 2), (0.5, 0.5, 3, 9), (3, 1, 1.5, 4), (3, 1, 1.5, 25),
             (20, 4, 5, 10), (20, 4, 5, 150), (7, 3, 10, 6), (7, 3, 10, 2), (2, 0.2, 0.3, 50), (2, 0.2, 0.3, 5),
             (50, 1, 2, 60), (50, 1, 2, 20), (8, 2.5, 2.6, 100), (8, 2.5, 2.6, 400), (0.1, 2, 3, 4), (0.1, 2, 3, 1),
             (4, 2, 8, 7), (15, 6, 7, 90), (15, 6, 7, 200), (1.5, 0.3, 0.9, 11), (6, 2, 3, 17), (9, 1, 4, 13)]]
    esepb = {"baseline": 5.0, "jump": 2.0, "rate": 3.0, "capacity": 8}
    out = [
        _claim("esep-steady-negbin", "esep_steady_queue", "negbin_pmf", "TV", 0.02, r(100_000), 1, BASE,
               "stationary queue is negative binomial with success probability jump/rate", seed),
        _claim("esep-hawkes-mean-equality", "intensity_mean_difference", "zero", "moment-z", 3.0, r(100_000), 2,
               {**BASE, "t": 5.0}, "matched ESEP and Hawkes intensities have equal means", seed),
        _claim("esep-hawkes-variance-order", "intensity_variance_pair", "none", "one-sided-order", 3.0, r(100_000),
               2, {**BASE, "t": 5.0}, "Hawkes intensity variance is at most the ESEP's", seed),
        _claim("moment-ode-mean-equality", "ode_mean_difference", "zero", "abs-error", 1e-8, 1, 3,
               {**BASE, "t": 5.0}, "mean ODEs coincide", seed),
        _claim("moment-ode-variance-order", "ode_variance_pair", "none", "one-sided-order", 1e-8, 1, 3,
               {**BASE, "t": 5.0}, "second-moment ODEs are ordered", seed),
        _claim("transient-intensity-mgf", "transient_transforms", "transient_transform_values", "moment-z", 3.0,
               r(1_000_000), 4, {**transient, "which": "intensity_mgf", "grid": [-0.1, -0.05, 0.02, 0.05, 0.08]},
               "closed-form transient MGF of the intensity", seed),
        _claim("transient-counting-pgf", "transient_transforms", "transient_transform_values", "moment-z", 3.0,
               r(1_000_000), 4, {**transient, "which": "counting_pgf", "grid": [0.7, 0.8, 0.85, 0.9, 0.95]},
               "closed-form PGF of the counting process", seed),
        _claim("transient-joint-pgf", "transient_transforms", "transient_transform_values", "moment-z", 3.0,
               r(1_000_000), 4, {**transient, "which": "joint_pgf",
                                 "grid": [[0.9, 0.8], [0.7, 0.9], [0.95, 0.7], [0.8, 0.8], [0.75, 0.95]]},
               "closed-form joint PGF of active and departed counts", seed),
        _claim("matrix-pmf-simulation", "counting_histogram", "matrix_pmf_values", "moment-z", 3.0, r(1_000_000), 4,
               pmf_params, "matrix-exponential PMF against simulation", seed),
        _claim("matrix-pmf-series", "matrix_pmf_values", "series_pmf_values", "abs-error", 1e-6, 1, 5, pmf_params,
               "matrix PMF against Taylor coefficients of the counting PGF", seed),
    ]
    for i, model in enumerate((ESEP, HAWKES)):
        cp = {**BASE, "model": model}
        out += [
            _claim(f"progeny-{model}-chi2", "cluster_progeny", "progeny_pmf", "chi2", 0.01, r(100_000), 6 + i, cp,
                   "total progeny law", seed),
            _claim(f"generations-{model}-chi2", "cluster_generations", "generations_pmf", "chi2", 0.01, r(100_000),
                   6 + i, cp, "number-of-generations law", seed),
            _claim(f"progeny-{model}-mean", "cluster_progeny_mean", "progeny_mean", "moment-z", 3.0, r(100_000),
                   6 + i, cp, "mean progeny rate/(rate-jump) = 3", seed),
        ]
    sis = {**BASE, "populations": [50, 100, 500, 1000, 10_000]}
    out += [
        _claim("family-decomposition", "compound_pgf_values", "negbin_pgf_values", "abs-error", 1e-10, 1, 8,
               {**BASE, "z": [0.3, 0.7, 0.95]}, "Poisson-logarithmic compound equals the negative binomial", seed),
        _claim("sis-tv-largest", "sis_tv_largest", "zero", "abs-error", 0.02, r(100_000), 9, sis,
               "SIS law within 0.02 TV of the ESEP law at N=10^4", seed),
        _claim("sis-tv-monotone", "sis_tv_steps", "none", "one-sided-order", 2.0, r(100_000), 9, sis,
               "TV decreases in N up to a 2-SE band", seed),
    ]
    for i, (b, a, mu) in enumerate(((1.0, 1.0, 2.0), (5.0, 2.0, 3.0))):
        bp = {"baseline": b, "jump": a, "service": mu, "n_list": [1, 2, 4, 8]}
        out += [
            _claim(f"batch-scaling-ks8-set{i + 1}", "batch_ks_largest", "none", "KS", 0.05, r(10_000), 10 + i, bp,
                   "n-GESEP intensity within KS 0.05 of the matched Hawkes at n=8", seed),
            _claim(f"batch-scaling-improves-set{i + 1}", "batch_ks_first_last", "none", "one-sided-order", 1e-12,
                   r(10_000), 10 + i, bp, "KS at n=8 below KS at n=1", seed),
        ]
    out += [
        _claim("hesep-sandwich", "sandwich_variance_pairs", "none", "one-sided-order", 3.0, r(100_000), 12, sandwich,
               "Var(Hawkes) <= Var(HESEP) <= Var(ESEP) with matched means", seed),
        _claim("hesep-renewal", "renewal_rate", "hesep_rate", "relative-error", 0.01, 1, 13,
               {"baseline": 10.0, "jump": 2.0, "decay": 2.0, "service": 2.0, "t": 10_000.0},
               "N_t/t approaches nu_inf", seed),
        _claim("diffusion-bracket-100", "diffusion_bracket", "none", "one-sided-order", 1e-12, r(100_000), 14,
               {**diff, "scale": 100}, "scaled variance inside [sigma2(0), sigma2(1)]", seed),
        _claim("diffusion-bracket-1000", "diffusion_bracket", "none", "one-sided-order", 1e-12, r(25_000), 15,
               {**diff, "scale": 1000}, "scaled variance inside [sigma2(0), sigma2(1)]", seed),
        _claim("diffusion-ratio-gamma-1000", "diffusion_variance", "diffusion_ratio_gamma_variance",
               "relative-error", 0.10, r(25_000), 15, {**diff, "scale": 1000},
               "scaled variance within 10% of gamma = mu/(mu+beta)", seed),
        _claim("blocking-pmf-grid", "esepb_pmf_grid", "truncated_negbin_grid", "abs-error", 1e-10, 1, 16,
               {"grid": grid}, "incomplete-beta PMF equals the renormalised truncation", seed),
        _claim("blocked-fraction", "blocked_fraction_estimate", "blocking_fraction", "moment-z", 3.0, 1, 17,
               {**esepb, "horizon": 50_000.0}, "simulated blocked fraction matches the closed form", seed),
        _claim("pasta-ratio-limit", "pasta_ratio_largest", "one", "abs-error", 0.05, 1, 18,
               {"baseline": 10.0, "jump": 2.0, "rate": 3.0, "capacity": 5, "n_list": [1, 2, 5, 10, 20, 50]},
               "blocked fraction over P(full) within 0.05 of 1 at the largest scale", seed),
        _claim("pasta-ratio-monotone", "pasta_ratio_steps", "none", "one-sided-order", 1e-12, 1, 18,
               {"baseline": 10.0, "jump": 2.0, "rate": 3.0, "capacity": 5, "n_list": [1, 2, 5, 10, 20, 50]},
               "ratio decreases toward 1 along the scale grid", seed),
    ]
    return out


def control_suite(seed: int = MASTER_SEED) -> list[ClaimSpec]:
    """Claims that must fail: a wrong oracle guards against a vacuous checker."""
    return [_claim("negative-control-swapped-negbin", "esep_steady_queue", "negbin_pmf_swapped", "TV", 0.02, 20_000,
                   1, BASE, "negative binomial with the success probability swapped", seed)]


_QUICK = ("moment-ode-mean-equality", "moment-ode-variance-order", "matrix-pmf-series", "progeny-esep-chi2",
          "progeny-esep-mean", "family-decomposition", "blocking-pmf-grid", "pasta-ratio-limit",
          "pasta-ratio-monotone")


def quick_suite(seed: int = MASTER_SEED) -> list[ClaimSpec]:
    """Deterministic claims plus cluster checks at 2*10^4 replications; runs in seconds."""
    return [replace(s, replications=min(s.replications, 20_000)) for s in default_suite(seed) if s.claim_id in _QUICK]


SUITES = {"default": default_suite, "controls": control_suite, "quick": quick_suite}
