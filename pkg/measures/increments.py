# measures/increments.py
"""
The law of 2K₁, the horizontal displacement between the leaving times of depths 0 and 1,
from a Dirichlet problem on Γ̂ between an inner and an outer depth.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from dyadlab.errors import DomainError

from .crest import _offset, dirichlet_system, solve_dirichlet

logger = logging.getLogger(__name__)


@dataclass
class IncrementLaw:
    """
    Masses on the integer displacements `support` (units of 2^{-bits} at depth-0 scale,
    so bits = 1 gives the law of 2K₁).
    """

    support: np.ndarray
    masses: np.ndarray
    inner: int
    target: int
    outer: int
    symmetrized: bool = False

    @property
    def bits(self) -> int:
        return self.target - self.inner

    def mass(self, displacement: int) -> float:
        hit = np.flatnonzero(self.support == displacement)
        return float(self.masses[hit[0]]) if len(hit) else 0.0

    def mean_abs(self) -> float:
        return float(np.abs(self.support) @ self.masses)

    def asymmetry(self) -> float:
        """max |P[Z = z] − P[Z = −z]|"""
        return float(np.max(np.abs(self.masses - self.masses[::-1])))

    def symmetrize(self) -> "IncrementLaw":
        return IncrementLaw(
            self.support, (self.masses + self.masses[::-1]) / 2, self.inner, self.target, self.outer, True
        )

    def tv(self, other: "IncrementLaw") -> float:
        if not np.array_equal(self.support, other.support):
            raise DomainError("increment laws live on different supports")
        return float(np.abs(self.masses - other.masses).sum() / 2)

    def csv_header(self):
        return ["displacement_num", "mass"]

    def csv_rows(self):
        for z, p in zip(self.support, self.masses):
            yield int(z), float(p)

    def to_dict(self):
        return {
            "inner": self.inner,
            "target": self.target,
            "outer": self.outer,
            "symmetrized": self.symmetrized,
            "mean_abs": self.mean_abs(),
            "asymmetry": self.asymmetry(),
            "mass_at_zero": self.mass(0),
        }


def k1_law(inner: int = 6, target: int = 7, outer: int = 19, tol: float = 1e-12) -> IncrementLaw:
    """
    For each word x at depth `target`, the probability that a walk from x visits 0^inner
    before any other depth-inner word or depth `outer`. The masses are normalized and
    indexed by x's signed offset from 0^inner, measured in depth-target units.
    """
    if not 0 < inner < target < outer:
        raise DomainError("need 0 < inner < target < outer")
    if outer > 22:
        raise DomainError("outer depth is limited to 22")
    top_values = np.zeros(1 << inner)
    top_values[0] = 1.0
    matrix, b = dirichlet_system(inner, outer, top_values)
    h, info = solve_dirichlet(matrix, b, tol)
    start = _offset(inner, target)
    m = 1 << target
    values = h[start:start + m]

    # signed offsets −m/2 .. m/2; the word at offset m/2 is split between both ends
    half = m // 2
    support = np.arange(-half, half + 1)
    masses = np.zeros(m + 1)
    masses[half:m] = values[:half]
    masses[1:half] = values[half + 1:]
    masses[0] = masses[m] = values[half] / 2
    total = masses.sum()
    logger.info("K1 law between depths %d and %d: raw mass %.6f, %d iterations", inner, outer, total, info.iterations)
    return IncrementLaw(support, masses / total, inner, target, outer)


def k1_truncation_tv(outer: int = 19, other: int | None = None, inner: int = 6, target: int = 7) -> float:
    """TV distance between the K₁ laws truncated at `outer` and at `other` (default outer − 1)."""
    other = outer - 1 if other is None else other
    return k1_law(inner, target, outer).tv(k1_law(inner, target, other))
