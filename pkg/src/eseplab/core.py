"""Parameter records, event logs, RNG streams and state reconstruction."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Iterator

import numpy as np

from .errors import (
    AffineMismatch,
    CapacityMissing,
    MissingField,
    NonPositiveRate,
    TimeOutOfRange,
    Unstable,
    ValidationError,
)
from .laws import KernelSpec, Law

ESEP = "esep"
HAWKES = "hawkes"
NGESEP = "ngesep"
HESEP = "hesep"
ESEP_B = "esep_b"
SIS = "sis"
MODELS = (ESEP, HAWKES, NGESEP, HESEP, ESEP_B, SIS)
_AFFINE = (ESEP, ESEP_B, NGESEP, SIS)

ARRIVAL, EXPIRATION, BLOCK = 0, 1, 2
KIND_NAMES = ("arrival", "expiration", "block")

_U64 = 2**64
_AFFINE_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """One record that drives every simulator and evaluator.

    ``expire_rate`` is the per-entity expiration (service) rate and
    ``decay_rate`` the exponential decay rate of a Hawkes-type intensity.
    ``capacity=None`` means unlimited, as does ``population=None``.
    ``intensity0=None`` is resolved by :func:`validate_params` to the
    model's natural default.
    """

    baseline: float
    jump: float
    expire_rate: float = 0.0
    decay_rate: float = 0.0
    capacity: int | None = None
    batch_law: Law | None = None
    duration_law: Law | None = None
    population: int | None = None
    q0: int = 0
    n0: int = 0
    intensity0: float | None = None
    stable: bool | None = None

    def with_(self, **changes) -> ModelParams:
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        for key in ("batch_law", "duration_law"):
            law = getattr(self, key)
            d[key] = None if law is None else law.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ModelParams:
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown ModelParams fields: {sorted(unknown)}")
        for key in ("batch_law", "duration_law"):
            if d.get(key) is not None:
                d[key] = Law.from_dict(d[key])
        return cls(**d)


def _check_model(model: str) -> str:
    if model not in MODELS:
        raise ValidationError(f"unknown model {model!r}; expected one of {MODELS}")
    return model


def default_intensity0(p: ModelParams, model: str, n: int = 1) -> float:
    if model == HAWKES:
        return p.baseline
    if model == NGESEP:
        return p.baseline + p.jump * p.q0 / n
    return p.baseline + p.jump * p.q0


def is_stable(p: ModelParams, model: str, n: int = 1) -> bool:
    if model in (ESEP, ESEP_B, SIS):
        return p.expire_rate > p.jump
    if model == HAWKES:
        return p.decay_rate > p.jump
    if model == HESEP:
        return p.expire_rate + p.decay_rate > p.jump
    # n-GESEP: mean offspring per arrival is (jump/n) * E[B] * E[G]
    if p.batch_law is None or p.duration_law is None:
        return False
    return p.jump * p.batch_law.mean() * p.duration_law.mean() / n < 1.0


def validate_params(p: ModelParams, model: str, n: int = 1) -> ModelParams:
    """Check model-specific constraints and return a copy with defaults resolved.

    A zero jump is accepted everywhere (the Poisson reduction). A zero
    baseline is accepted only for the SIS model, whose pure-death case needs it.
    """
    _check_model(model)
    if p.baseline < 0 or (p.baseline == 0 and model != SIS):
        raise NonPositiveRate(f"baseline must be positive, got {p.baseline}")
    if p.jump < 0:
        raise NonPositiveRate(f"jump must be non-negative, got {p.jump}")
    if p.expire_rate < 0 or p.decay_rate < 0:
        raise NonPositiveRate("expire_rate and decay_rate must be non-negative")
    if model in (ESEP, ESEP_B) and p.expire_rate <= 0:
        raise NonPositiveRate(f"{model} needs a positive expire_rate")
    if p.q0 < 0 or p.n0 < 0 or int(p.q0) != p.q0 or int(p.n0) != p.n0:
        raise ValidationError("q0 and n0 must be non-negative integers")
    if n < 1 or int(n) != n:
        raise ValidationError(f"scale n must be a positive integer, got {n}")

    if model == ESEP_B:
        if p.capacity is None:
            raise CapacityMissing("esep_b needs a finite capacity")
        if p.capacity < 0 or int(p.capacity) != p.capacity:
            raise ValidationError("capacity must be a non-negative integer")
        if p.q0 > p.capacity:
            raise ValidationError("q0 exceeds capacity")
    elif p.capacity is not None:
        raise ValidationError(f"capacity is only meaningful for esep_b, not {model}")

    if model == SIS:
        if p.population is None:
            raise MissingField("sis needs a finite population")
        if p.population < 1 or int(p.population) != p.population:
            raise ValidationError("population must be a positive integer")
        if p.q0 > p.population:
            raise ValidationError("initial infected count exceeds population")
    elif p.population is not None:
        raise ValidationError(f"population is only meaningful for sis, not {model}")

    if model == NGESEP:
        if p.batch_law is None:
            raise MissingField("ngesep needs a batch_law")
        if p.duration_law is None:
            raise MissingField("ngesep needs a duration_law")
        if not p.batch_law.is_integer:
            raise ValidationError("batch_law must be an integer law")
        if p.duration_law.is_integer:
            raise ValidationError("duration_law must be a law on the positive reals")

    expected = default_intensity0(p, model, n)
    eta0 = expected if p.intensity0 is None else float(p.intensity0)
    if model in _AFFINE:
        if abs(eta0 - expected) > _AFFINE_TOL * max(1.0, abs(expected)):
            raise AffineMismatch(f"intensity0 must equal baseline + jump*q0 = {expected}, got {eta0}")
    elif model == HAWKES:
        if eta0 < p.baseline:
            raise AffineMismatch("Hawkes intensity0 must be at least the baseline")
    else:
        upper = p.baseline + p.jump * p.q0
        if eta0 < p.baseline - _AFFINE_TOL or eta0 > upper + _AFFINE_TOL * max(1.0, upper):
            raise AffineMismatch(f"HESEP intensity0 must lie in [baseline, baseline + jump*q0] = "
                                 f"[{p.baseline}, {upper}], got {eta0}")
    return replace(p, intensity0=eta0, stable=is_stable(p, model, n))


def burn_in(p: ModelParams) -> float:
    """Default burn-in 20 / (expire_rate + decay_rate - jump) for stable parameters."""
    gap = p.expire_rate + p.decay_rate - p.jump
    if gap <= 0:
        raise Unstable("burn-in rule needs expire_rate + decay_rate > jump")
    return 20.0 / gap


@dataclass(frozen=True)
class RngStreamSpec:
    """Names one counter-based random stream: ``(seed, stream_id)`` plus optional sub-keys.

    Streams are Philox generators keyed through ``numpy.random.SeedSequence``
    with the stream id as spawn key, so equal specs give identical draws and
    distinct ids give independent streams.
    """

    seed: int
    stream_id: int = 0
    sub: tuple[int, ...] = ()

    def __post_init__(self):
        for v in (self.seed, self.stream_id, *self.sub):
            if int(v) != v or not 0 <= v < _U64:
                raise ValidationError(f"seed and stream ids must be 64-bit unsigned integers, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.sub))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, j: int) -> RngStreamSpec:
        return RngStreamSpec(self.seed, self.stream_id, (*self.sub, int(j)))


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Time-ordered event log of one simulated path.

    ``kinds`` holds 0 (arrival), 1 (expiration) or 2 (block); ``batches`` the
    batch size of each event (1 for expirations). Hawkes paths also carry
    per-arrival ``marks`` and the ``kernel`` needed to rebuild the intensity.
    ``scale`` is the n of an n-GESEP.
    """

    model: str
    params: ModelParams
    horizon: float
    seed: int
    stream_id: int
    times: np.ndarray
    kinds: np.ndarray
    batches: np.ndarray
    marks: np.ndarray | None = None
    kernel: KernelSpec | None = None
    scale: int = 1
    diagnostics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times, np.float64))
        object.__setattr__(self, "kinds", _frozen(self.kinds, np.int8))
        object.__setattr__(self, "batches", _frozen(self.batches, np.int64))
        if self.marks is not None:
            object.__setattr__(self, "marks", _frozen(self.marks, np.float64))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def events(self) -> list[tuple[float, str, int]]:
        return list(self.iter_events())

    def iter_events(self) -> Iterator[tuple[float, str, int]]:
        for t, k, b in zip(self.times.tolist(), self.kinds.tolist(), self.batches.tolist()):
            yield t, KIND_NAMES[k], b

    def arrival_times(self) -> np.ndarray:
        return self.times[self.kinds == ARRIVAL]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "kind", "batch"])
        for t, k, b in self.iter_events():
            w.writerow([repr(t), k, b])
        return buf.getvalue()

    def to_json(self) -> str:
        env = {
            "model": self.model,
            "params": self.params.to_dict(),
            "horizon": self.horizon,
            "seed": self.seed,
            "stream_id": self.stream_id,
            "scale": self.scale,
            "kernel": None if self.kernel is None else self.kernel.to_dict(),
            "marks": None if self.marks is None else self.marks.tolist(),
            "diagnostics": self.diagnostics,
            "events": self.to_csv(),
        }
        return json.dumps(env, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> SamplePath:
        env = json.loads(text)
        times, kinds, batches = events_from_csv(env["events"])
        return cls(
            model=env["model"],
            params=ModelParams.from_dict(env["params"]),
            horizon=env["horizon"],
            seed=env["seed"],
            stream_id=env["stream_id"],
            times=times,
            kinds=kinds,
            batches=batches,
            marks=None if env["marks"] is None else np.array(env["marks"]),
            kernel=None if env["kernel"] is None else KernelSpec.from_dict(env["kernel"]),
            scale=env["scale"],
            diagnostics=env["diagnostics"],
        )

    def same_events(self, other: SamplePath) -> bool:
        return (np.array_equal(self.times, other.times) and np.array_equal(self.kinds, other.kinds)
                and np.array_equal(self.batches, other.batches))


def events_from_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["time", "kind", "batch"]:
        raise ValidationError("event CSV must start with the header time,kind,batch")
    body = rows[1:]
    times = np.array([float(r[0]) for r in body], dtype=np.float64)
    kinds = np.array([KIND_NAMES.index(r[1]) for r in body], dtype=np.int8)
    batches = np.array([int(r[2]) for r in body], dtype=np.int64)
    return times, kinds, batches


def reconstruct_state(path: SamplePath, t: float) -> tuple[int, int, float]:
    """Return ``(Q_t, N_t, intensity_t)`` with right-continuous conventions.

    ``N_t`` counts arrival events (a batch counts once) on top of ``n0``.
    For SIS the intensity is the driving term ``baseline + jump * I_t``;
    the actual infection rate multiplies it by the susceptible fraction.
    """
    if not 0 <= t <= path.horizon:
        raise TimeOutOfRange(f"t={t} outside [0, {path.horizon}]")
    p = path.params
    k = int(np.searchsorted(path.times, t, side="right"))
    kinds, batches = path.kinds[:k], path.batches[:k]
    arr = kinds == ARRIVAL
    q = int(p.q0 + batches[arr].sum() - np.count_nonzero(kinds == EXPIRATION))
    nt = int(p.n0 + np.count_nonzero(arr))
    if path.model in (ESEP, ESEP_B, SIS):
        return q, nt, p.baseline + p.jump * q
    if path.model == NGESEP:
        return q, nt, p.baseline + p.jump * q / path.scale
    if path.model == HAWKES:
        return q, nt, _hawkes_intensity(path, t, k)
    return q, nt, _hesep_intensity(path, t, k)


def _hawkes_intensity(path: SamplePath, t: float, k: int) -> float:
    p, ker = path.params, path.kernel
    lam = p.baseline + (p.intensity0 - p.baseline) * float(ker.shape(t))
    arr = path.kinds[:k] == ARRIVAL
    a = path.times[:k][arr]
    if len(a):
        lam += float(np.sum(path.marks[: len(a)] * ker.shape(t - a)))
    return lam


def hesep_replay(path: SamplePath) -> tuple[np.ndarray, np.ndarray]:
    """Intensity and queue length just after every event of an HESEP path."""
    p = path.params
    nu, q, last = p.intensity0, p.q0, 0.0
    nus = np.empty(len(path))
    qs = np.empty(len(path), dtype=np.int64)
    for i, (s, kind) in enumerate(zip(path.times.tolist(), path.kinds.tolist())):
        nu = p.baseline + (nu - p.baseline) * math.exp(-p.decay_rate * (s - last))
        last = s
        if kind == ARRIVAL:
            nu += p.jump
            q += 1
        else:
            nu -= (nu - p.baseline) / q
            q -= 1
        nus[i], qs[i] = nu, q
    return nus, qs


def _hesep_intensity(path: SamplePath, t: float, k: int) -> float:
    p = path.params
    if k == 0:
        return p.baseline + (p.intensity0 - p.baseline) * math.exp(-p.decay_rate * t)
    sub = replace(path, times=path.times[:k], kinds=path.kinds[:k], batches=path.batches[:k])
    nus, _ = hesep_replay(sub)
    return p.baseline + (nus[-1] - p.baseline) * math.exp(-p.decay_rate * (t - path.times[k - 1]))


@dataclass(frozen=True)
class EmpiricalSummary:
    """Histogram or sorted sample with moments and the seeds that produced it."""

    samples: int
    histogram: dict[int, int] | np.ndarray
    mean: float
    variance: float
    seed_range: tuple[int, int, int]

    @classmethod
    def from_values(cls, values, *, discrete: bool, seed: int, first_stream: int = 0,
                    last_stream: int = 0) -> EmpiricalSummary:
        v = np.asarray(values)
        if v.size == 0:
            from .errors import EmptySample
            raise EmptySample("cannot summarise an empty sample")
        if discrete:
            keys, counts = np.unique(v.astype(np.int64), return_counts=True)
            hist: dict[int, int] | np.ndarray = {int(k): int(c) for k, c in zip(keys, counts)}
        else:
            hist = np.sort(v.astype(float))
        var = float(v.var(ddof=1)) if v.size > 1 else 0.0
        return cls(int(v.size), hist, float(v.mean()), var, (seed, first_stream, last_stream))

    def to_dict(self) -> dict[str, Any]:
        hist = ({str(k): c for k, c in self.histogram.items()} if isinstance(self.histogram, dict)
                else self.histogram.tolist())
        return {"samples": self.samples, "histogram": hist, "mean": self.mean,
                "variance": self.variance, "seed_range": list(self.seed_range)}
