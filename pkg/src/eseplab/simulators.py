"""Exact event-driven samplers for the ESEP family, Hawkes, HESEP and SIS models.

Two entry points per model share one compiled event loop:

* ``simulate_*`` returns a single :class:`SamplePath` with its full event log;
* :func:`sample_states` runs many replications and returns only the states
  at requested observation times, which is what Monte Carlo checks need.

Replications are cut into fixed-size chunks and chunk ``j`` draws from the
child stream ``rng.child(j)``, so results do not depend on the number of
worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import (
    ARRIVAL,
    ESEP,
    ESEP_B,
    HAWKES,
    HESEP,
    NGESEP,
    SIS,
    ModelParams,
    RngStreamSpec,
    SamplePath,
    validate_params,
)
from .errors import ExplosionGuard, Unstable, ValidationError
from .laws import KernelSpec

DEFAULT_MAX_EVENTS = 10**7
CHUNK = 4096


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("ESEPLAB_THREADS", "1")))
    except ValueError:
        return 1


def _check_status(status: int, cap: int) -> None:
    if status == K.EXPLODED:
        raise ExplosionGuard(f"path exceeded {cap} events")


def _check_horizon(horizon: float) -> float:
    if not horizon > 0:
        raise ValidationError(f"horizon must be positive, got {horizon}")
    return float(horizon)


def kernel_for(p: ModelParams) -> KernelSpec:
    """Exponential kernel with jump ``p.jump`` and decay ``p.decay_rate``."""
    return KernelSpec.exponential(p.jump, p.decay_rate)


_EMPTY = np.empty(0)


# ---------------------------------------------------------------------------
# single paths


def _birth_death_path(model, p, horizon, rng, max_events, pop, cap) -> SamplePath:
    gen = rng.generator()
    _, t, k, b, status = K.birth_death(gen, p.baseline, p.jump, p.expire_rate, pop, cap, p.q0, p.n0,
                                       horizon, _EMPTY, 1, True, max_events)
    _check_status(status, max_events)
    return SamplePath(model, p, horizon, rng.seed, rng.stream_id, t, k, b)


def simulate_esep(p: ModelParams, horizon: float, rng: RngStreamSpec,
                  max_events: int = DEFAULT_MAX_EVENTS) -> SamplePath:
    """CTMC path: in state Q the next event comes after Exp(baseline + (jump+expire)Q)."""
    p = validate_params(p, ESEP)
    return _birth_death_path(ESEP, p, _check_horizon(horizon), rng, max_events, 0, -1)


def simulate_esep_b(p: ModelParams, horizon: float, rng: RngStreamSpec,
                    max_events: int = DEFAULT_MAX_EVENTS) -> SamplePath:
    """ESEP truncated at ``capacity``; attempts at capacity are logged as blocks."""
    p = validate_params(p, ESEP_B)
    return _birth_death_path(ESEP_B, p, _check_horizon(horizon), rng, max_events, 0, p.capacity)


def simulate_sis(p: ModelParams, horizon: float, rng: RngStreamSpec,
                 max_events: int = DEFAULT_MAX_EVENTS) -> SamplePath:
    """Infections at rate (baseline + jump*I)(N - I)/N, recoveries at rate expire_rate*I."""
    p = validate_params(p, SIS)
    return _birth_death_path(SIS, p, _check_horizon(horizon), rng, max_events, p.population, -1)


def simulate_hawkes(p: ModelParams, kernel: KernelSpec | None, horizon: float, rng: RngStreamSpec,
                    max_events: int = DEFAULT_MAX_EVENTS) -> SamplePath:
    """Ogata thinning; ``kernel=None`` uses the exponential kernel built from ``p``.

    An initial excess ``intensity0 - baseline`` decays with the kernel shape.
    """
    p = validate_params(p, HAWKES)
    kernel = kernel_for(p) if kernel is None else kernel
    horizon = _check_horizon(horizon)
    scode, spar = kernel.packed()
    mcode, mpar = kernel.mark_law.packed()
    gen = rng.generator()
    _, t, m, proposals, status = K.hawkes(gen, p.baseline, p.intensity0 - p.baseline, scode, spar,
                                          mcode, mpar, horizon, _EMPTY, 1, True, max_events)
    _check_status(status, max_events)
    diag = {"proposals": float(proposals), "acceptance_rate": len(t) / proposals if proposals else 1.0}
    return SamplePath(HAWKES, p, horizon, rng.seed, rng.stream_id, t, np.zeros(len(t), np.int8),
                      np.ones(len(t), np.int64), marks=m, kernel=kernel, diagnostics=diag)


def simulate_ngesep(p: ModelParams, n: int, horizon: float, rng: RngStreamSpec,
                    max_events: int = DEFAULT_MAX_EVENTS) -> SamplePath:
    """Batch arrivals at rate baseline + (jump/n)Q with general durations.

    The initial ``q0`` individuals get fresh durations drawn at time 0.
    """
    p = validate_params(p, NGESEP, n)
    horizon = _check_horizon(horizon)
    bcode, bpar = p.batch_law.packed()
    dcode, dpar = p.duration_law.packed()
    gen = rng.generator()
    _, t, k, b, status = K.ngesep(gen, p.baseline, p.jump, float(n), bcode, bpar, dcode, dpar, p.q0, p.n0,
                                  horizon, _EMPTY, 1, True, max_events)
    _check_status(status, max_events)
    return SamplePath(NGESEP, p, horizon, rng.seed, rng.stream_id, t, k, b, scale=int(n))


def simulate_hesep(p: ModelParams, horizon: float, rng: RngStreamSpec,
                   max_events: int = DEFAULT_MAX_EVENTS) -> SamplePath:
    """Thinning with bound nu + mu*Q; ``expire_rate`` is mu and ``decay_rate`` is beta."""
    p = validate_params(p, HESEP)
    horizon = _check_horizon(horizon)
    gen = rng.generator()
    _, t, k, proposals, status = K.hesep(gen, p.baseline, p.jump, p.decay_rate, p.expire_rate, p.intensity0,
                                         p.q0, p.n0, horizon, _EMPTY, 1, True, max_events)
    _check_status(status, max_events)
    diag = {"proposals": float(proposals), "acceptance_rate": len(t) / proposals if proposals else 1.0}
    return SamplePath(HESEP, p, horizon, rng.seed, rng.stream_id, t, k, np.ones(len(t), np.int64),
                      diagnostics=diag)


# ---------------------------------------------------------------------------
# clusters


@dataclass(frozen=True)
class ClusterPath:
    """All descendants of one seed arrival at time 0, grouped by generation."""

    generations: list[list[float]]
    total: int

    @property
    def depth(self) -> int:
        return len(self.generations)


def _cluster_model(p: ModelParams, model: str) -> bool:
    if model not in (ESEP, HAWKES):
        raise ValidationError(f"clusters are defined for esep and hawkes, not {model!r}")
    rate = p.expire_rate if model == ESEP else p.decay_rate
    if not rate > p.jump:
        raise Unstable("clusters are a.s. finite only when the decay/expiration rate exceeds the jump")
    return model == HAWKES


def simulate_cluster(p: ModelParams, model: str, rng: RngStreamSpec,
                     max_size: int = DEFAULT_MAX_EVENTS) -> ClusterPath:
    """Grow one cluster breadth-first until extinction.

    ESEP members live Exp(expire_rate) and bear children at rate ``jump``
    while alive (geometric offspring); Hawkes members bear Poisson(jump/decay)
    children at Exp(decay) offsets.
    """
    hawkes_model = _cluster_model(p, model)
    rate = p.decay_rate if hawkes_model else p.expire_rate
    tot, depth, times, gens, status = K.clusters(rng.generator(), hawkes_model, p.jump, rate, 1, True, max_size)
    _check_status(status, max_size)
    out: list[list[float]] = [[] for _ in range(int(depth[0]))]
    for s, g in zip(times.tolist(), gens.tolist()):
        out[g - 1].append(s)
    return ClusterPath(out, int(tot[0]))


def sample_clusters(p: ModelParams, model: str, reps: int, rng: RngStreamSpec,
                    threads: int | None = None, max_size: int = DEFAULT_MAX_EVENTS) -> tuple[np.ndarray, np.ndarray]:
    """Total progeny and number of generations for ``reps`` independent clusters."""
    hawkes_model = _cluster_model(p, model)
    rate = p.decay_rate if hawkes_model else p.expire_rate

    def run(gen, m):
        tot, depth, _, _, status = K.clusters(gen, hawkes_model, p.jump, rate, m, False, max_size)
        _check_status(status, max_size)
        return np.stack([tot, depth], axis=1)

    out = _fan_out(run, reps, rng, threads)
    return out[:, 0], out[:, 1]


# ---------------------------------------------------------------------------
# replication ensembles


def _fan_out(run, reps: int, rng: RngStreamSpec, threads: int | None):
    if reps < 1:
        raise ValidationError("replications must be at least 1")
    sizes = [CHUNK] * (reps // CHUNK) + ([reps % CHUNK] if reps % CHUNK else [])
    jobs = [(rng.child(j), m) for j, m in enumerate(sizes)]
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(jobs) == 1:
        parts = [run(s.generator(), m) for s, m in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: run(job[0].generator(), job[1]), jobs))
    return np.concatenate(parts, axis=0)


def sample_states(model: str, p: ModelParams, obs_times, reps: int, rng: RngStreamSpec, *,
                  kernel: KernelSpec | None = None, n: int = 1, threads: int | None = None,
                  max_events: int = DEFAULT_MAX_EVENTS) -> dict[str, np.ndarray]:
    """States of ``reps`` independent paths at the sorted ``obs_times``.

    Returns arrays of shape (reps, len(obs_times)) keyed by ``Q``, ``N``
    and ``intensity``; birth-death models add ``D`` (expirations) and
    ``blocked`` (blocked attempts). Hawkes paths report no ``Q``.
    """
    obs = np.atleast_1d(np.asarray(obs_times, dtype=float))
    if obs.size == 0 or np.any(np.diff(obs) < 0) or obs[0] < 0:
        raise ValidationError("obs_times must be non-empty, non-negative and sorted")
    horizon = float(obs[-1])
    p = validate_params(p, model, n)

    if model in (ESEP, ESEP_B, SIS):
        pop = p.population if model == SIS else 0
        cap = p.capacity if model == ESEP_B else -1

        def run(gen, m):
            o, _, _, _, status = K.birth_death(gen, p.baseline, p.jump, p.expire_rate, pop, cap, p.q0, p.n0,
                                               horizon, obs, m, False, max_events)
            _check_status(status, max_events)
            return o

        o = _fan_out(run, reps, rng, threads)
        q = o[:, :, 0]
        return {"Q": q, "N": o[:, :, 1], "D": o[:, :, 2], "blocked": o[:, :, 3],
                "intensity": p.baseline + p.jump * q}

    if model == NGESEP:
        bcode, bpar = p.batch_law.packed()
        dcode, dpar = p.duration_law.packed()

        def run(gen, m):
            o, _, _, _, status = K.ngesep(gen, p.baseline, p.jump, float(n), bcode, bpar, dcode, dpar, p.q0,
                                          p.n0, horizon, obs, m, False, max_events)
            _check_status(status, max_events)
            return o

        o = _fan_out(run, reps, rng, threads)
        q = o[:, :, 0]
        return {"Q": q, "N": o[:, :, 1], "intensity": p.baseline + p.jump * q / n}

    if model == HAWKES:
        kernel = kernel_for(p) if kernel is None else kernel
        scode, spar = kernel.packed()
        mcode, mpar = kernel.mark_law.packed()

        def run(gen, m):
            o, _, _, _, status = K.hawkes(gen, p.baseline, p.intensity0 - p.baseline, scode, spar, mcode, mpar,
                                          horizon, obs, m, False, max_events)
            _check_status(status, max_events)
            return o

        o = _fan_out(run, reps, rng, threads)
        return {"intensity": o[:, :, 0], "N": o[:, :, 1].astype(np.int64) + p.n0}

    def run(gen, m):
        o, _, _, _, status = K.hesep(gen, p.baseline, p.jump, p.decay_rate, p.expire_rate, p.intensity0, p.q0,
                                     p.n0, horizon, obs, m, False, max_events)
        _check_status(status, max_events)
        return o

    o = _fan_out(run, reps, rng, threads)
    return {"intensity": o[:, :, 0], "Q": o[:, :, 1].astype(np.int64), "N": o[:, :, 2].astype(np.int64)}


def steady_samples(model: str, p: ModelParams, reps: int, rng: RngStreamSpec, *, burn: float | None = None,
                   n: int = 1, kernel: KernelSpec | None = None, threads: int | None = None) -> dict[str, np.ndarray]:
    """End-of-burn-in states, one per replication; default burn-in from :func:`core.burn_in`."""
    from .core import burn_in

    if burn is None:
        if model == NGESEP:
            pv = validate_params(p, NGESEP, n)
            gap = 1.0 / pv.duration_law.mean() * (1.0 - pv.jump * pv.batch_law.mean() * pv.duration_law.mean() / n)
            if gap <= 0:
                raise Unstable("burn-in rule needs a stable n-GESEP")
            burn = 20.0 / gap
        else:
            burn = burn_in(p)
    out = sample_states(model, p, [burn], reps, rng, kernel=kernel, n=n, threads=threads)
    return {k: v[:, 0] for k, v in out.items()}


def arrival_count(path: SamplePath, t: float) -> int:
    return int(np.count_nonzero((path.kinds == ARRIVAL) & (path.times <= t)))
