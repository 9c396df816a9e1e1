"""Attack-time distributions.

The solvers only ever need the functional ``x -> E[min(w, x)]`` plus the
survival function; the simulator additionally samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ValidationError


class AttackTime:
    """Base class for the distribution of the time an attack needs to succeed."""

    name = "generic"

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def survival(self, x: float) -> float:
        raise NotImplementedError

    def expected_min(self, x: float) -> float:
        """E[min(w, x)] = integral of the survival function over [0, x]."""
        if x <= 0:
            return 0.0
        if math.isinf(x):
            return self.mean
        val, _ = integrate.quad(self.survival, 0.0, x, epsrel=1e-8, limit=200)
        return val

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(AttackTime):
    value: float
    name = "point"

    def __post_init__(self):
        if not self.value > 0:
            raise ValidationError(f"point-mass attack time must be > 0, got {self.value}")

    @property
    def mean(self):
        return self.value

    def survival(self, x):
        return 1.0 if x < self.value else 0.0

    def expected_min(self, x):
        return min(self.value, max(x, 0.0))

    def sample(self, rng, size):
        return np.full(size, self.value)

    def to_dict(self):
        return {"kind": "point", "value": self.value}


@dataclass(frozen=True)
class Uniform(AttackTime):
    low: float
    high: float
    name = "uniform"

    def __post_init__(self):
        if not (0 <= self.low < self.high):
            raise ValidationError(f"uniform attack time needs 0 <= low < high, got ({self.low}, {self.high})")

    @property
    def mean(self):
        return 0.5 * (self.low + self.high)

    def survival(self, x):
        if x < self.low:
            return 1.0
        if x >= self.high:
            return 0.0
        return (self.high - x) / (self.high - self.low)

    def expected_min(self, x):
        a, b = self.low, self.high
        if x <= 0:
            return 0.0
        if x <= a:
            return x
        if x >= b:
            return self.mean
        # a + integral_a^x (b - t)/(b - a) dt
        return a + ((b - a) ** 2 - (b - x) ** 2) / (2.0 * (b - a))

    def sample(self, rng, size):
        return rng.uniform(self.low, self.high, size)

    def to_dict(self):
        return {"kind": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Exponential(AttackTime):
    rate: float
    name = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError(f"exponential rate must be > 0, got {self.rate}")

    @property
    def mean(self):
        return 1.0 / self.rate

    def survival(self, x):
        return 1.0 if x <= 0 else math.exp(-self.rate * x)

    def expected_min(self, x):
        if x <= 0:
            return 0.0
        return -math.expm1(-self.rate * x) / self.rate

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def to_dict(self):
        return {"kind": "exponential", "rate": self.rate}


class ScipyAttackTime(AttackTime):
    """Wraps any frozen ``scipy.stats`` distribution supported on [0, inf)."""

    name = "scipy"

    def __init__(self, frozen):
        self.frozen = frozen
        m = float(frozen.mean())
        if not math.isfinite(m):
            raise ValidationError("attack-time distribution must have a finite mean")
        if frozen.cdf(0.0) > 0 and frozen.support()[0] < 0:
            raise ValidationError("attack-time distribution must be supported on [0, inf)")
        self._mean = m

    @property
    def mean(self):
        return self._mean

    def survival(self, x):
        return float(self.frozen.sf(x))

    def sample(self, rng, size):
        return np.asarray(self.frozen.rvs(size=size, random_state=rng), dtype=float)

    def to_dict(self):
        return {"kind": "scipy", "dist": self.frozen.dist.name,
                "args": list(self.frozen.args), "kwds": dict(self.frozen.kwds)}


def from_dict(doc: dict) -> AttackTime:
    kind = doc.get("kind")
    if kind == "point":
        return PointMass(float(doc["value"]))
    if kind == "uniform":
        return Uniform(float(doc["low"]), float(doc["high"]))
    if kind == "exponential":
        return Exponential(float(doc["rate"]))
    if kind == "scipy":
        from scipy import stats
        dist = getattr(stats, doc["dist"])
        return ScipyAttackTime(dist(*doc.get("args", []), **doc.get("kwds", {})))
    raise ValidationError(f"unknown attack-time distribution kind {kind!r}")
