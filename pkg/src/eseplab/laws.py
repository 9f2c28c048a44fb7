"""Tagged distribution descriptors and excitation kernels.

Every law is encoded as an integer code plus a flat float64 parameter
vector so the compiled samplers can draw from it without Python objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special

from .errors import NonMonotoneKernel, ValidationError

# law codes shared with the compiled kernels
EXPONENTIAL = 0
DETERMINISTIC = 1
LOGNORMAL = 2
HYPEREXPONENTIAL = 3
GEOMETRIC = 4
DETERMINISTIC_INT = 5

_NAMES = {
    EXPONENTIAL: "exponential",
    DETERMINISTIC: "deterministic",
    LOGNORMAL: "lognormal",
    HYPEREXPONENTIAL: "hyperexponential",
    GEOMETRIC: "geometric",
    DETERMINISTIC_INT: "deterministic_int",
}
_CODES = {v: k for k, v in _NAMES.items()}


@dataclass(frozen=True)
class Law:
    """A distribution over positive reals (durations, marks) or positive integers (batches).

    Use the named constructors; ``params`` layout depends on ``code``.
    The geometric law lives on {1, 2, ...} with success probability p, so
    its mean is 1/p.
    """

    code: int
    params: tuple[float, ...]

    @classmethod
    def exponential(cls, rate: float) -> Law:
        if not rate > 0:
            raise ValidationError(f"exponential rate must be positive, got {rate}")
        return cls(EXPONENTIAL, (float(rate),))

    @classmethod
    def deterministic(cls, value: float) -> Law:
        if not value > 0:
            raise ValidationError(f"deterministic value must be positive, got {value}")
        return cls(DETERMINISTIC, (float(value),))

    @classmethod
    def lognormal(cls, m: float, s: float) -> Law:
        if not s > 0:
            raise ValidationError(f"lognormal shape must be positive, got {s}")
        return cls(LOGNORMAL, (float(m), float(s)))

    @classmethod
    def hyperexponential(cls, probs, rates) -> Law:
        probs = [float(x) for x in probs]
        rates = [float(x) for x in rates]
        if len(probs) != len(rates) or not probs:
            raise ValidationError("hyperexponential needs matching non-empty probs and rates")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise ValidationError("hyperexponential probs must be a probability vector")
        if any(r <= 0 for r in rates):
            raise ValidationError("hyperexponential rates must be positive")
        return cls(HYPEREXPONENTIAL, (float(len(probs)), *probs, *rates))

    @classmethod
    def geometric(cls, p: float) -> Law:
        if not 0 < p <= 1:
            raise ValidationError(f"geometric success probability must lie in (0, 1], got {p}")
        return cls(GEOMETRIC, (float(p),))

    @classmethod
    def geometric_mean(cls, mean: float) -> Law:
        return cls.geometric(1.0 / mean)

    @classmethod
    def deterministic_int(cls, n: int) -> Law:
        if int(n) != n or n < 1:
            raise ValidationError(f"deterministic batch must be a positive integer, got {n}")
        return cls(DETERMINISTIC_INT, (float(n),))

    @property
    def name(self) -> str:
        return _NAMES[self.code]

    @property
    def is_integer(self) -> bool:
        return self.code in (GEOMETRIC, DETERMINISTIC_INT)

    def _hyper(self) -> tuple[np.ndarray, np.ndarray]:
        k = int(self.params[0])
        return np.array(self.params[1:1 + k]), np.array(self.params[1 + k:1 + 2 * k])

    def mean(self) -> float:
        c, par = self.code, self.params
        if c == EXPONENTIAL:
            return 1.0 / par[0]
        if c in (DETERMINISTIC, DETERMINISTIC_INT):
            return par[0]
        if c == LOGNORMAL:
            return math.exp(par[0] + 0.5 * par[1] ** 2)
        if c == HYPEREXPONENTIAL:
            probs, rates = self._hyper()
            return float(np.sum(probs / rates))
        return 1.0 / par[0]

    def variance(self) -> float:
        c, par = self.code, self.params
        if c == EXPONENTIAL:
            return 1.0 / par[0] ** 2
        if c in (DETERMINISTIC, DETERMINISTIC_INT):
            return 0.0
        if c == LOGNORMAL:
            m, s = par
            return (math.exp(s * s) - 1.0) * math.exp(2 * m + s * s)
        if c == HYPEREXPONENTIAL:
            probs, rates = self._hyper()
            return float(np.sum(2 * probs / rates**2)) - self.mean() ** 2
        return (1.0 - par[0]) / par[0] ** 2

    def tail(self, x) -> np.ndarray:
        """Survival function P(X > x), vectorised over ``x``."""
        x = np.asarray(x, dtype=float)
        c, par = self.code, self.params
        if c == EXPONENTIAL:
            return np.where(x < 0, 1.0, np.exp(-par[0] * np.maximum(x, 0.0)))
        if c == DETERMINISTIC:
            return np.where(x < par[0], 1.0, 0.0)
        if c == LOGNORMAL:
            with np.errstate(divide="ignore"):
                z = (np.log(np.maximum(x, 1e-300)) - par[0]) / (par[1] * math.sqrt(2.0))
            return np.where(x <= 0, 1.0, 0.5 * special.erfc(z))
        if c == HYPEREXPONENTIAL:
            probs, rates = self._hyper()
            xx = np.maximum(x, 0.0)[..., None]
            return np.where(x < 0, 1.0, np.sum(probs * np.exp(-rates * xx), axis=-1))
        if c == DETERMINISTIC_INT:
            return np.where(x < par[0], 1.0, 0.0)
        p = par[0]
        k = np.floor(np.maximum(x, 0.0))
        return np.where(x < 1, 1.0, (1.0 - p) ** k)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        c, par = self.code, self.params
        if c == EXPONENTIAL:
            return rng.exponential(1.0 / par[0], size)
        if c == DETERMINISTIC:
            return np.full(size if size is not None else (), par[0])
        if c == LOGNORMAL:
            return rng.lognormal(par[0], par[1], size)
        if c == HYPEREXPONENTIAL:
            probs, rates = self._hyper()
            idx = rng.choice(len(probs), size=size, p=probs)
            return rng.exponential(1.0 / rates[idx])
        if c == GEOMETRIC:
            return rng.geometric(par[0], size)
        return np.full(size if size is not None else (), int(par[0]), dtype=np.int64)

    def packed(self) -> tuple[int, np.ndarray]:
        return self.code, np.asarray(self.params, dtype=np.float64)

    def to_dict(self) -> dict[str, Any]:
        c, par = self.code, self.params
        if c == HYPEREXPONENTIAL:
            probs, rates = self._hyper()
            return {"kind": self.name, "probs": probs.tolist(), "rates": rates.tolist()}
        keys = {
            EXPONENTIAL: ("rate",),
            DETERMINISTIC: ("value",),
            LOGNORMAL: ("m", "s"),
            GEOMETRIC: ("p",),
            DETERMINISTIC_INT: ("n",),
        }[c]
        out: dict[str, Any] = {"kind": self.name}
        out.update(dict(zip(keys, par)))
        if c == DETERMINISTIC_INT:
            out["n"] = int(out["n"])
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Law:
        d = dict(d)
        kind = d.pop("kind")
        ctor = {
            "exponential": cls.exponential,
            "deterministic": cls.deterministic,
            "lognormal": cls.lognormal,
            "hyperexponential": cls.hyperexponential,
            "geometric": cls.geometric,
            "deterministic_int": cls.deterministic_int,
        }.get(kind)
        if ctor is None:
            raise ValidationError(f"unknown law kind {kind!r}")
        return ctor(**d)


# kernel shape codes
SHAPE_EXPONENTIAL = 0
SHAPE_POWER_LAW = 1
SHAPE_TAIL = 2


@dataclass(frozen=True)
class KernelSpec:
    """Excitation kernel written as ``g(x) = M * h(x)`` with ``h(0) = 1``.

    Each accepted arrival carries a mark ``M`` drawn from ``mark_law`` and
    contributes ``M * h(t - A)`` to the intensity. ``exponential(alpha, beta)``
    is ``h(x) = exp(-beta x)`` with marks fixed at alpha; ``power_law(k, c, p)``
    is ``k / (c + x)**p``; ``tail_of_duration(G)`` uses the survival function
    of a duration law as the shape.
    """

    kind: str
    shape_params: tuple[float, ...]
    mark_law: Law
    duration_law: Law | None = None
    _shape_code: int = field(default=0, repr=False)

    @classmethod
    def exponential(cls, alpha: float, beta: float, mark_law: Law | None = None) -> KernelSpec:
        if beta < 0:
            raise NonMonotoneKernel("exponential kernel needs a non-negative decay rate")
        marks = mark_law if mark_law is not None else _point_mark(alpha)
        return cls("exponential", (float(beta),), marks, None, SHAPE_EXPONENTIAL)

    @classmethod
    def power_law(cls, k: float, c: float, p: float) -> KernelSpec:
        if c <= 0 or k < 0:
            raise ValidationError("power-law kernel needs k >= 0 and c > 0")
        if p < 0:
            raise NonMonotoneKernel("power-law kernel with negative exponent is increasing")
        return cls("power_law", (float(c), float(p)), _point_mark(k / c**p), None, SHAPE_POWER_LAW)

    @classmethod
    def tail_of_duration(cls, duration_law: Law, mark_law: Law) -> KernelSpec:
        if duration_law.is_integer:
            raise ValidationError("duration law must live on the positive reals")
        return cls("tail_of_duration", (), mark_law, duration_law, SHAPE_TAIL)

    @property
    def shape_code(self) -> int:
        return self._shape_code

    def shape(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._shape_code == SHAPE_EXPONENTIAL:
            return np.exp(-self.shape_params[0] * x)
        if self._shape_code == SHAPE_POWER_LAW:
            c, p = self.shape_params
            return (c / (c + x)) ** p
        return self.duration_law.tail(x)

    def __call__(self, x) -> np.ndarray:
        """Mean kernel value E[M] h(x)."""
        return self.mark_law.mean() * self.shape(x)

    def branching_ratio(self) -> float:
        m = self.mark_law.mean()
        if self._shape_code == SHAPE_EXPONENTIAL:
            b = self.shape_params[0]
            return math.inf if b == 0 else m / b
        if self._shape_code == SHAPE_POWER_LAW:
            c, p = self.shape_params
            return math.inf if p <= 1 else m * c / (p - 1)
        return m * self.duration_law.mean()

    def packed(self) -> tuple[int, np.ndarray]:
        """Shape code and parameters in the layout the compiled sampler expects."""
        if self._shape_code == SHAPE_TAIL:
            code, par = self.duration_law.packed()
            return SHAPE_TAIL, np.concatenate([[float(code)], par])
        return self._shape_code, np.asarray(self.shape_params, dtype=np.float64)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "mark_law": self.mark_law.to_dict()}
        if self.kind == "exponential":
            out["beta"] = self.shape_params[0]
        elif self.kind == "power_law":
            out["c"], out["p"] = self.shape_params
        else:
            out["duration_law"] = self.duration_law.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> KernelSpec:
        marks = Law.from_dict(d["mark_law"])
        if d["kind"] == "exponential":
            return cls.exponential(marks.mean(), d["beta"], mark_law=marks)
        if d["kind"] == "power_law":
            c, p = d["c"], d["p"]
            return cls.power_law(marks.mean() * c**p, c, p)
        if d["kind"] == "tail_of_duration":
            return cls.tail_of_duration(Law.from_dict(d["duration_law"]), marks)
        raise ValidationError(f"unknown kernel kind {d['kind']!r}")


def _point_mark(value: float) -> Law:
    # a zero mark is legal (zero kernel, Poisson reduction); Law.deterministic rejects it
    if value < 0:
        raise ValidationError("kernel mark must be non-negative")
    return Law(DETERMINISTIC, (float(value),))
