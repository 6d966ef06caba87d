# measures/histograms.py
"""
Measures on [0, 1) binned at 2^{-m}: the harmonic measure of Γ̂ built by convolution from
the K₁ law, its dual counterpart, g-measure profiles, and the diagnostics that separate the
primal measures from the uniform ones.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from dyadlab.errors import DomainError, ResolutionError
from lattice.words import Word
from walks.estimators import Estimate

from .increments import IncrementLaw

logger = logging.getLogger(__name__)

MAX_GRID_BITS = 24

# substring_density wants this many bits per pattern cell
SUBSTRING_BITS_PER_CELL = 10_000


@dataclass
class DyadicHistogram:
    """Masses of the intervals [k·2^{-m}, (k+1)·2^{-m}) for k = 0 .. 2^m − 1."""

    resolution: int
    masses: np.ndarray
    # bound on the mass the construction could have misplaced
    error: float = 0.0

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=np.float64)
        if len(self.masses) != 1 << self.resolution:
            raise ResolutionError(f"{len(self.masses)} bins for resolution {self.resolution}")
        if (self.masses < 0).any():
            raise DomainError("negative mass in histogram")

    @classmethod
    def uniform(cls, resolution: int) -> "DyadicHistogram":
        return cls(resolution, np.full(1 << resolution, 2.0 ** -resolution))

    @classmethod
    def from_counts(cls, counts) -> "DyadicHistogram":
        counts = np.asarray(counts, dtype=np.float64)
        return cls(int(len(counts)).bit_length() - 1, counts / counts.sum())

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def mass(self, prefix: Word | str) -> float:
        """Mass of the dyadic interval whose binary digits start with `prefix`."""
        w = Word.parse(prefix) if isinstance(prefix, str) else prefix
        return float(self.coarsen(w.depth).masses[w.value])

    def coarsen(self, m: int) -> "DyadicHistogram":
        if not 0 <= m <= self.resolution:
            raise ResolutionError(f"cannot coarsen resolution {self.resolution} to {m}")
        return DyadicHistogram(m, self.masses.reshape(1 << m, -1).sum(axis=1), self.error)

    def doubling_pushforward(self) -> "DyadicHistogram":
        """Image under x ↦ 2x mod 1, at resolution m − 1."""
        if self.resolution < 1:
            raise ResolutionError("resolution 0 has no doubling image")
        return DyadicHistogram(self.resolution - 1, self.masses.reshape(2, -1).sum(axis=0), self.error)

    def mirrored(self) -> "DyadicHistogram":
        """Image under x ↦ 1 − x."""
        return DyadicHistogram(self.resolution, self.masses[::-1], self.error)

    def l1(self, other: "DyadicHistogram") -> float:
        if other.resolution > self.resolution:
            other = other.coarsen(self.resolution)
        if other.resolution != self.resolution:
            raise ResolutionError("the other histogram is coarser")
        return float(np.abs(self.masses - other.masses).sum())

    def tv(self, other: "DyadicHistogram") -> float:
        return self.l1(other) / 2

    @staticmethod
    def left_endpoint(k: int, m: int) -> str:
        return f"{k}/2^{m}"

    @staticmethod
    def bit_changes(k: int, m: int) -> int:
        """Number of adjacent digit pairs that differ in the m-digit expansion of k."""
        if m < 2:
            return 0
        return ((k ^ (k >> 1)) & ((1 << (m - 1)) - 1)).bit_count()

    def csv_header(self):
        return ["bin_index", "left_endpoint", "mass", "density", "bit_changes"]

    def csv_rows(self):
        m = self.resolution
        scale = 2.0 ** m
        for k, p in enumerate(self.masses):
            yield k, self.left_endpoint(k, m), float(p), float(p) * scale, self.bit_changes(k, m)

    def to_dict(self):
        return {
            "resolution": self.resolution,
            "total": self.total,
            "error": self.error,
            "first_bit_zero": self.mass("0") if self.resolution else 1.0,
        }


def dual_harmonic_exact(resolution: int) -> DyadicHistogram:
    """The dual harmonic measure is Lebesgue measure."""
    return DyadicHistogram.uniform(resolution)


def harmonic_histogram(
    law: IncrementLaw,
    terms: int = 22,
    resolution: int = 14,
    symmetrize: bool = True,
) -> DyadicHistogram:
    """
    Law of Σ_{n=1}^{terms} Z_n / 2^{n + bits − 1} mod 1, Z_n IID with `law`, on the grid of
    step 2^{-terms}, aggregated to 2^{-resolution}. Every term's characteristic function on
    the grid is periodic, so each is one small FFT tiled across the full grid.
    The reported error is E|Z| · 2^{-(terms + bits − 1)}, the expected size of the dropped tail.
    """
    if terms < resolution + 4:
        raise ResolutionError("need terms >= resolution + 4")
    grid_bits = terms + law.bits - 1
    if grid_bits > MAX_GRID_BITS:
        raise ResolutionError(f"grid of 2^{grid_bits} points is too fine")
    if symmetrize and not law.symmetrized:
        law = law.symmetrize()
    size = 1 << grid_bits
    omega = np.arange(size)
    spectrum = np.ones(size, dtype=np.complex128)
    for n in range(1, terms + 1):
        period_bits = n + law.bits - 1
        period = 1 << period_bits
        base = np.zeros(period)
        np.add.at(base, law.support % period, law.masses)
        spectrum *= np.fft.fft(base)[omega & (period - 1)]
    fine = np.fft.ifft(spectrum).real
    fine = np.clip(fine, 0.0, None)
    fine /= fine.sum()
    error = law.mean_abs() * 2.0 ** -grid_bits
    logger.info("harmonic histogram: %d terms on 2^%d points, tail bound %.2e", terms, grid_bits, error)
    return DyadicHistogram(grid_bits, fine, error).coarsen(resolution)


# ---------------------------------------------------------------------
# g-measure profile and entropy
# ---------------------------------------------------------------------

@dataclass
class GMeasureProfile:
    """g(x) = mass(I_x) / (mass(I_x) + mass(I_{x+1/2})) per bin, and h = −Σ mass · log₂ g."""

    resolution: int
    g: np.ndarray
    entropy: float
    flagged: list[int] = field(default_factory=list)

    def at(self, x: float) -> float:
        return float(self.g[int(x * (1 << self.resolution)) % len(self.g)])

    def csv_header(self):
        return ["bin_index", "g"]

    def csv_rows(self):
        for k, value in enumerate(self.g):
            yield k, None if math.isnan(value) else float(value)

    def csv_preamble(self):
        return [f"h={self.entropy:.17g}"]

    def to_dict(self):
        return {
            "resolution": self.resolution,
            "entropy": self.entropy,
            "g_at_quarter": self.at(0.25),
            "flagged": self.flagged,
        }


def g_profile(h: DyadicHistogram) -> GMeasureProfile:
    if h.resolution < 8:
        raise ResolutionError("g profiles need resolution >= 8")
    half = 1 << (h.resolution - 1)
    low, high = h.masses[:half], h.masses[half:]
    pair = low + high
    flagged = np.flatnonzero(pair == 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        g_low = np.where(pair > 0, low / pair, np.nan)
    g = np.concatenate([g_low, 1.0 - g_low])
    keep = (h.masses > 0) & ~np.isnan(g)
    entropy = float(-(h.masses[keep] * np.log2(g[keep])).sum())
    flagged_bins = sorted({int(k) for k in flagged} | {int(k) + half for k in flagged})
    if flagged_bins:
        logger.warning("%d bin(s) with an all-zero sibling pair", len(flagged_bins))
    return GMeasureProfile(h.resolution, g, entropy, flagged_bins)


def g_derivative(profile: GMeasureProfile, step: int = 1) -> np.ndarray:
    """(g(x + step·δ) − g(x)) / (step·δ) with δ = 2^{-m}, cyclically."""
    delta = 2.0 ** -profile.resolution
    return (np.roll(profile.g, -step) - profile.g) / (step * delta)


# ---------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------

@dataclass
class TwoBitStatistics:
    masses: dict[str, float]
    error: float

    @property
    def excess(self) -> float:
        """mass(00) + mass(11) − 1/2"""
        return self.masses["00"] + self.masses["11"] - 0.5

    def to_dict(self):
        return {"masses": self.masses, "excess": self.excess, "error": self.error}


def two_bit_statistics(h: DyadicHistogram) -> TwoBitStatistics:
    if h.resolution < 2:
        raise ResolutionError("two-bit statistics need resolution >= 2")
    quarters = h.coarsen(2).masses
    return TwoBitStatistics({format(k, "02b"): float(quarters[k]) for k in range(4)}, h.error)


@dataclass
class SingularityReport:
    """Distance between a histogram and the uniform measure, per resolution."""

    rows: list[tuple[int, float, float]]

    @property
    def tv(self) -> dict[int, float]:
        return {m: tv for m, tv, _ in self.rows}

    @property
    def increasing(self) -> bool:
        values = [tv for _, tv, _ in self.rows]
        return all(b > a for a, b in zip(values, values[1:]))

    def csv_header(self):
        return ["resolution", "tv_distance", "l1_distance"]

    def csv_rows(self):
        yield from self.rows

    def to_dict(self):
        return {"tv_distance": {str(m): tv for m, tv, _ in self.rows}, "increasing": self.increasing}


def singularity_report(h: DyadicHistogram, resolutions=range(6, 15)) -> SingularityReport:
    rows = []
    for m in resolutions:
        coarse = h.coarsen(m)
        l1 = coarse.l1(DyadicHistogram.uniform(m))
        rows.append((m, l1 / 2, l1))
    return SingularityReport(rows)


def substring_density(s: Word | np.ndarray, sigma: Word | str) -> Estimate:
    """
    Sliding-window frequency of `sigma` in the bits of `s`, read most significant first.
    `s` needs at least SUBSTRING_BITS_PER_CELL · 2^|sigma| bits. The stderr treats windows
    as independent and is only indicative.
    """
    sigma = Word.parse(sigma) if isinstance(sigma, str) else sigma
    if isinstance(s, Word):
        bits = _word_bits(s)
    else:
        bits = np.asarray(s, dtype=np.uint8)
    needed = SUBSTRING_BITS_PER_CELL << sigma.depth
    if len(bits) < needed:
        raise DomainError(f"{len(bits)} bits are too few for a pattern of length {sigma.depth}; need {needed}")
    if sigma.depth == 0:
        return Estimate.exact(1.0)
    windows = np.lib.stride_tricks.sliding_window_view(bits, sigma.depth)
    hits = (windows == np.array(sigma.bits, dtype=np.uint8)).all(axis=1)
    return Estimate.from_samples(hits)


def _word_bits(w: Word) -> np.ndarray:
    raw = np.frombuffer(w.value.to_bytes((w.depth + 7) // 8, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[len(raw) * 8 - w.depth:]
