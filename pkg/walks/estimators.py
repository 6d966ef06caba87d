# walks/estimators.py
"""Mean estimates that merge exactly (pooled count, mean and sum of squared deviations)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class Estimate:
    value: float
    count: int
    m2: float = 0.0

    @classmethod
    def from_samples(cls, samples) -> "Estimate":
        x = np.asarray(samples, dtype=np.float64)
        if x.size == 0:
            return cls(float("nan"), 0, 0.0)
        mean = float(x.mean())
        return cls(mean, int(x.size), float(((x - mean) ** 2).sum()))

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        return cls(float(value), 1, 0.0)

    @property
    def variance(self) -> float:
        if self.count < 2:
            return 0.0
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.variance / self.count)

    def merge(self, other: "Estimate") -> "Estimate":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.value - self.value
        mean = self.value + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return Estimate(mean, n, m2)

    def within(self, target: float, sigmas: float = 3.0) -> bool:
        return abs(self.value - target) <= sigmas * self.stderr

    def scaled(self, factor: float) -> "Estimate":
        return Estimate(self.value * factor, self.count, self.m2 * factor * factor)

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "count": self.count}

    def __str__(self):
        return f"{self.value:.6f} ± {self.stderr:.2g} (n={self.count})"


def merge_all(estimates: Iterable[Estimate]) -> Estimate:
    return reduce(Estimate.merge, estimates, Estimate(float("nan"), 0, 0.0))
