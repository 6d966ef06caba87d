# walks/sampling.py
"""
Monte Carlo estimators built on the batch walker.

- ergodic averages: p₃ and the primal/dual speeds
- leaving times: the law of X_{T_n}, harmonic-measure samples, renewal increments
- the stationary measure: fixed-time labels seen from the walker, and long bit strings
  glued together from independent leaving segments
- the exact two-step drift table
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from django.conf import settings
from scipy import stats

from dyadlab.errors import BudgetExceeded, DomainError
from lattice.dyadic import DyadicRational, LazyDyadic, ZeroTailProvider
from lattice.graphs import GraphKind, LatticeVertex, neighbors_lattice
from lattice.words import Word

from .batch import WINDOW, BatchWalker, low_bits_from_counts
from .estimators import Estimate, merge_all
from .parallel import DEFAULT_CHUNK, map_chunks, resolve_threads

logger = logging.getLogger(__name__)

# rooted walks may wander this far above the root before they are retired
ROOT_HEADROOM = 64

# stationary walkers still above depth 2L get this many more fixed-length blocks
STATIONARY_EXTRA_BLOCKS = 8

# harmonic points are read no shallower than this
MIN_HARMONIC_DEPTH = 16


def _confirmation(c: int | None) -> int:
    return settings.DYADLAB_CONFIRMATION_DEPTH if c is None else c


def _budget(budget: int | None) -> int:
    return settings.DYADLAB_STEP_BUDGET if budget is None else budget


def _burn_in(levels: int | None) -> int:
    return settings.DYADLAB_BURN_IN_LEVELS if levels is None else levels


# ---------------------------------------------------------------------
# Ergodic averages
# ---------------------------------------------------------------------

@dataclass
class ErgodicEstimate:
    graph: GraphKind
    p3: Estimate
    speed: Estimate
    walkers: int
    steps_per_walker: int
    burn_in: int
    lost: int = 0

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.value,
            "p3": self.p3.to_dict(),
            "speed": self.speed.to_dict(),
            "walkers": self.walkers,
            "steps_per_walker": self.steps_per_walker,
            "burn_in": self.burn_in,
            "lost": self.lost,
        }


def _ergodic_chunk(graph, seed, steps, burn_in):
    def run(start, stop):
        bw = BatchWalker(graph, seed, np.arange(start, stop))
        degree3 = np.zeros(len(bw), dtype=np.int64)
        depth_at_burn_in = bw.depth.copy()
        for t in range(steps):
            info = bw.step()
            if t >= burn_in:
                degree3 += info.degree_before == 3
            if t + 1 == burn_in:
                depth_at_burn_in = bw.depth.copy()
        kept = bw.alive
        counted = steps - burn_in
        fractions = degree3[kept] / counted
        speeds = (bw.depth[kept] - depth_at_burn_in[kept]) / counted
        return Estimate.from_samples(fractions), Estimate.from_samples(speeds), bw.lost

    return run


def run_ergodic(
    graph: GraphKind | str,
    total_steps: int,
    seed: int,
    walkers: int = 1024,
    burn_in_fraction: float = 0.1,
    threads: int | None = None,
) -> ErgodicEstimate:
    """
    Time averages over `walkers` independent walks of total_steps / walkers steps each,
    with the first burn_in_fraction of every walk discarded. Error bars are batch
    means across walkers.
    """
    graph = GraphKind(graph)
    if total_steps < 10_000:
        raise DomainError("ergodic averages need at least 10^4 steps")
    walkers = max(1, min(walkers, total_steps // 100))
    steps = total_steps // walkers
    burn_in = int(steps * burn_in_fraction)
    parts = map_chunks(_ergodic_chunk(graph, seed, steps, burn_in), walkers, chunk_size=256, threads=threads)
    result = ErgodicEstimate(
        graph=graph,
        p3=merge_all(p for p, _, _ in parts),
        speed=merge_all(s for _, s, _ in parts),
        walkers=walkers,
        steps_per_walker=steps,
        burn_in=burn_in,
        lost=sum(lost for _, _, lost in parts),
    )
    logger.info("%s ergodic run: p3=%s speed=%s", graph.value, result.p3, result.speed)
    return result


def estimate_p3(total_steps: int, seed: int, walkers: int = 1024, threads: int | None = None) -> ErgodicEstimate:
    """Fraction of time at degree-3 vertices of Γ̂."""
    return run_ergodic(GraphKind.WRAPPED, total_steps, seed, walkers, threads=threads)


def estimate_speed(total_steps: int, seed: int, walkers: int = 1024, threads: int | None = None) -> Estimate:
    return run_ergodic(GraphKind.WRAPPED, total_steps, seed, walkers, threads=threads).speed


def estimate_dual_speed(total_steps: int, seed: int, walkers: int = 1024, threads: int | None = None) -> Estimate:
    return run_ergodic(GraphKind.DUAL, total_steps, seed, walkers, threads=threads).speed


def depth_tail_probability(t: int, samples: int, seed: int, threads: int | None = None) -> Estimate:
    """Empirical P[D_t <= D_0 + 1] for walks on Γ̂ started at ∅."""

    def run(start, stop):
        bw = BatchWalker(GraphKind.WRAPPED, seed, np.arange(start, stop))
        for _ in range(t):
            bw.step()
        return Estimate.from_samples(bw.depth <= 1)

    return merge_all(map_chunks(run, samples, threads=threads))


# ---------------------------------------------------------------------
# Leaving times
# ---------------------------------------------------------------------

@dataclass
class LeavingSnapshot:
    """Last visit (time, label, winding) to each level 0..n for the confirmed walkers of a chunk."""

    times: np.ndarray
    labels: np.ndarray
    winds: np.ndarray
    exceeded: int
    lost: int


def _run_leaving(graph, seed, start, stop, target_level, c, budget, root_self_loops=None) -> LeavingSnapshot:
    bw = BatchWalker(graph, seed, np.arange(start, stop), root_self_loops=root_self_loops)
    n = len(bw)
    levels = target_level + 1
    times = np.zeros((n, levels), dtype=np.int64)
    labels = np.zeros((n, levels), dtype=np.int64)
    winds = np.zeros((n, levels), dtype=np.int64)
    rows = np.arange(n)
    stop_depth = target_level + c
    while bw.active.any() and bw.time < budget:
        bw.step()
        at = bw.active & (bw.depth <= target_level)
        idx, d = rows[at], bw.depth[at]
        times[idx, d] = bw.time
        labels[idx, d] = bw.label[at]
        winds[idx, d] = bw.wind[at]
        bw.finish(bw.depth >= stop_depth)
    exceeded = int(bw.active.sum())
    if exceeded:
        logger.warning("%d walker(s) did not confirm level %d within %d steps", exceeded, target_level, budget)
    ok = bw.alive & bw.done
    return LeavingSnapshot(times[ok], labels[ok], winds[ok], exceeded, bw.lost)


def _leaving_snapshots(graph, target_level, samples, seed, c, budget, threads, root_self_loops=None, first=0):
    c = _confirmation(c)
    budget = _budget(budget)
    if target_level + c > WINDOW:
        raise DomainError(f"level {target_level} with confirmation depth {c} exceeds the {WINDOW}-bit label window")

    def run(start, stop):
        return _run_leaving(graph, seed, start, stop, target_level, c, budget, root_self_loops)

    return map_chunks(run, samples, threads=threads, first=first)


@dataclass
class LeavingDistribution:
    """Empirical law of X_{T_n} over the 2^n depth-n words."""

    level: int
    counts: np.ndarray
    exceeded: int = 0
    lost: int = 0

    @property
    def samples(self) -> int:
        return int(self.counts.sum())

    @property
    def masses(self) -> np.ndarray:
        return self.counts / max(self.samples, 1)

    @property
    def stderr(self) -> np.ndarray:
        p = self.masses
        return np.sqrt(p * (1 - p) / max(self.samples, 1))

    def mass(self, word: Word | str) -> float:
        w = Word.parse(word) if isinstance(word, str) else word
        if w.depth != self.level:
            raise DomainError(f"{w} is not a depth-{self.level} word")
        return float(self.masses[w.value])

    def csv_header(self):
        return ["word", "count", "mass", "stderr"]

    def csv_rows(self):
        for v, (count, mass, err) in enumerate(zip(self.counts, self.masses, self.stderr)):
            yield str(Word(v, self.level)), int(count), float(mass), float(err)

    def to_dict(self):
        return {
            "level": self.level,
            "samples": self.samples,
            "exceeded": self.exceeded,
            "lost": self.lost,
            "masses": {str(Word(v, self.level)): float(m) for v, m in enumerate(self.masses)},
        }


def leaving_distribution(
    n: int,
    samples: int,
    seed: int,
    confirmation_depth: int | None = None,
    budget: int | None = None,
    threads: int | None = None,
) -> LeavingDistribution:
    if not 1 <= n <= 16:
        raise DomainError("leaving distributions are tabulated for 1 <= n <= 16")
    parts = _leaving_snapshots(GraphKind.WRAPPED, n, samples, seed, confirmation_depth, budget, threads)
    counts = np.zeros(1 << n, dtype=np.int64)
    for part in parts:
        counts += np.bincount(part.labels[:, n], minlength=1 << n)
    return LeavingDistribution(
        n, counts, exceeded=sum(p.exceeded for p in parts), lost=sum(p.lost for p in parts)
    )


def renewal_increments(
    levels: tuple[int, ...] = (1, 2, 3),
    samples: int = 10_000,
    seed: int = 0,
    confirmation_depth: int | None = None,
    threads: int | None = None,
) -> dict[int, np.ndarray]:
    """T_{k+1} − T_k for each k in `levels`, one value per confirmed walk."""
    top = max(levels) + 1
    parts = _leaving_snapshots(GraphKind.WRAPPED, top, samples, seed, confirmation_depth, None, threads)
    times = np.concatenate([p.times for p in parts])
    return {k: times[:, k + 1] - times[:, k] for k in levels}


def renewal_ks_pvalues(increments: dict[int, np.ndarray]) -> dict[str, float]:
    """Two-sample KS p-values between consecutive renewal increments."""
    keys = sorted(increments)
    return {
        f"{a}-{b}": float(stats.ks_2samp(increments[a], increments[b]).pvalue)
        for a, b in zip(keys, keys[1:])
    }


@dataclass
class HarmonicSample:
    """
    Positions at the leaving time of depth N: label / 2^N (mod 1 on Γ̂ and Γ̂*), plus the
    winding on Γ₊. error_bound is E|2K₁| · 2^{-N}, the expected horizontal travel left.
    """

    graph: GraphKind
    max_depth: int
    labels: np.ndarray
    winds: np.ndarray
    first_increments: np.ndarray
    exceeded: int = 0
    lost: int = 0

    @property
    def samples(self) -> int:
        return len(self.labels)

    @property
    def error_bound(self) -> float:
        if not len(self.first_increments):
            return float("nan")
        return float(np.abs(self.first_increments).mean()) * 2.0 ** -self.max_depth

    def positions(self) -> np.ndarray:
        x = self.labels / 2.0 ** self.max_depth
        if self.graph is GraphKind.PLUS:
            x = x + self.winds
        return x

    def position(self, i: int) -> DyadicRational:
        value = DyadicRational(int(self.labels[i]), self.max_depth)
        if self.graph is GraphKind.PLUS:
            value = value + int(self.winds[i])
        return value

    def histogram_counts(self, resolution: int) -> np.ndarray:
        if resolution > self.max_depth:
            raise DomainError("resolution finer than the sampled depth")
        return np.bincount(self.labels >> (self.max_depth - resolution), minlength=1 << resolution)

    def csv_header(self):
        return ["sample", "label", "wind", "position"]

    def csv_rows(self):
        for i in range(self.samples):
            yield i, int(self.labels[i]), int(self.winds[i]), str(self.position(i))

    def to_dict(self):
        return {
            "graph": self.graph.value,
            "max_depth": self.max_depth,
            "samples": self.samples,
            "exceeded": self.exceeded,
            "lost": self.lost,
            "error_bound": self.error_bound,
            "first_bit_zero": float(np.mean(self.labels >> (self.max_depth - 1) == 0)) if self.samples else None,
        }


def sample_harmonic_points(
    max_depth: int,
    samples: int,
    seed: int,
    graph: GraphKind | str = GraphKind.WRAPPED,
    confirmation_depth: int | None = None,
    budget: int | None = None,
    threads: int | None = None,
    root_self_loops: bool | None = None,
    first: int = 0,
) -> HarmonicSample:
    graph = GraphKind(graph)
    if graph not in (GraphKind.WRAPPED, GraphKind.PLUS, GraphKind.DUAL):
        raise DomainError(f"harmonic points are sampled on Γ̂, Γ₊ or the dual, not {graph.value}")
    if max_depth < MIN_HARMONIC_DEPTH:
        raise DomainError(f"harmonic points are read at depth {MIN_HARMONIC_DEPTH} or deeper, not {max_depth}")
    parts = _leaving_snapshots(
        graph, max_depth, samples, seed, confirmation_depth, budget, threads, root_self_loops, first
    )
    labels = np.concatenate([p.labels[:, max_depth] for p in parts])
    winds = np.concatenate([p.winds[:, max_depth] for p in parts])
    # 2K_1 = 2(wind_1 − wind_0) + label_1, since the depth-0 label is always ∅
    k1 = np.concatenate([2 * (p.winds[:, 1] - p.winds[:, 0]) + p.labels[:, 1] for p in parts])
    return HarmonicSample(
        graph,
        max_depth,
        labels,
        winds,
        k1,
        exceeded=sum(p.exceeded for p in parts),
        lost=sum(p.lost for p in parts),
    )


def sample_harmonic_point(
    max_depth: int,
    seed: int,
    walker: int = 0,
    graph: GraphKind | str = GraphKind.WRAPPED,
    confirmation_depth: int | None = None,
    budget: int | None = None,
) -> DyadicRational:
    """One exact position at the leaving time of depth max_depth."""
    sample = sample_harmonic_points(
        max_depth, 1, seed, graph, confirmation_depth, budget, threads=1, first=walker
    )
    if not sample.samples:
        raise BudgetExceeded(f"walker {walker} did not leave depth {max_depth}", steps=_budget(budget), walker=walker)
    return sample.position(0)


@dataclass
class DualHarmonicHistogram:
    resolution: int
    counts: np.ndarray
    chi2: float
    pvalue: float

    def csv_header(self):
        return ["bin_index", "count"]

    def csv_rows(self):
        yield from enumerate(int(c) for c in self.counts)

    def csv_preamble(self):
        return [f"chi2={self.chi2:.17g}", f"pvalue={self.pvalue:.17g}"]

    def to_dict(self):
        return {
            "resolution": self.resolution,
            "samples": int(self.counts.sum()),
            "chi2": self.chi2,
            "pvalue": self.pvalue,
        }


def sample_dual_harmonic_histogram(
    resolution: int,
    samples: int,
    seed: int,
    max_depth: int | None = None,
    threads: int | None = None,
) -> DualHarmonicHistogram:
    """Dual-walk exit positions binned at 2^{-resolution}, with a χ² test against uniform."""
    max_depth = max_depth or max(resolution, MIN_HARMONIC_DEPTH)
    sample = sample_harmonic_points(max_depth, samples, seed, GraphKind.DUAL, threads=threads)
    counts = sample.histogram_counts(resolution)
    test = stats.chisquare(counts)
    return DualHarmonicHistogram(resolution, counts, float(test.statistic), float(test.pvalue))


# ---------------------------------------------------------------------
# Stationary measure
# ---------------------------------------------------------------------

@dataclass
class StationarySample:
    """Low `length` bits of the label seen from the walker, one integer per sample."""

    length: int
    values: list[int]
    dual: bool = False
    exceeded: int = 0
    lost: int = 0

    def words(self) -> list[Word]:
        return [Word(v, self.length) for v in self.values]

    def bit_frequency(self, index: int = 0) -> Estimate:
        """Frequency of a_{-index} = 1; index 0 is the last bit."""
        return Estimate.from_samples([(v >> index) & 1 for v in self.values])

    def csv_header(self):
        return ["sample", "bits"]

    def csv_rows(self):
        for i, w in enumerate(self.words()):
            yield i, str(w)

    def to_dict(self):
        return {
            "length": self.length,
            "dual": self.dual,
            "samples": len(self.values),
            "exceeded": self.exceeded,
            "lost": self.lost,
            "last_bit_one": self.bit_frequency(0).to_dict() if self.values else None,
        }


def _stationary_chunk(seed, length, dual, burn_in, extra_blocks=STATIONARY_EXTRA_BLOCKS):
    graph = GraphKind.DUAL_CHAIN if dual else GraphKind.LATTICE
    block = 9 * (2 * length + burn_in)
    top = -ROOT_HEADROOM
    width = ROOT_HEADROOM + block * (1 + extra_blocks) + 2

    def run(start, stop):
        bw = BatchWalker(graph, seed, np.arange(start, stop))
        counts = np.zeros((len(bw), width), dtype=np.int32)
        rows = np.arange(len(bw))
        values = {}
        for _ in range(1 + extra_blocks):
            for _ in range(block):
                info = bw.step()
                bw.retire(info.horizontal_depth < top, "wandered too far above the root")
                hit = (info.horizontal != 0) & bw.alive
                counts[rows[hit], info.horizontal_depth[hit] - top] += info.horizontal[hit]
            ready = bw.active & (bw.depth >= 2 * length)
            for i in rows[ready]:
                values[i] = low_bits_from_counts(counts[i], top, int(bw.depth[i]), length)
            bw.finish(ready)
            if not bw.active.any():
                break
        exceeded = int(bw.active.sum())
        return [values[i] for i in sorted(values)], exceeded, bw.lost

    return run


def sample_stationary_strings(
    length: int,
    samples: int,
    seed: int,
    dual: bool = False,
    burn_in: int | None = None,
    threads: int | None = None,
    first: int = 0,
) -> StationarySample:
    """
    Walk blocks of 9·(2L + burn-in) steps from the root of Γ_{…0} (or the dual chain) and
    read the low L bits of the label under the walker at the end of the first block that
    finds it at depth 2L or below. Reading happens only at block boundaries; stopping at
    a hitting time would bias the last bits. Walkers still shallow after
    STATIONARY_EXTRA_BLOCKS more blocks are counted as exceeded.
    """
    if not 1 <= length <= 64:
        raise DomainError("stationary strings are sampled for 1 <= L <= 64")
    burn_in = _burn_in(burn_in)
    parts = map_chunks(_stationary_chunk(seed, length, dual, burn_in), samples, chunk_size=1024, threads=threads,
                       first=first)
    sample = StationarySample(
        length,
        [v for values, _, _ in parts for v in values],
        dual,
        exceeded=sum(e for _, e, _ in parts),
        lost=sum(lost for _, _, lost in parts),
    )
    if sample.exceeded:
        logger.warning("%d walk(s) stayed above depth %d", sample.exceeded, 2 * length)
    return sample


def sample_stationary_string(length: int, seed: int, walker: int = 0, dual: bool = False,
                             burn_in: int | None = None) -> Word:
    sample = sample_stationary_strings(length, 1, seed, dual, burn_in, threads=1, first=walker)
    if not sample.values:
        raise BudgetExceeded(f"walker {walker} stayed above depth {2 * length}", walker=walker)
    return sample.words()[0]


def _segment_chunk(seed, dual, c, budget):
    graph = GraphKind.DUAL_CHAIN if dual else GraphKind.WRAPPED
    width = c + 2

    def run(start, stop):
        bw = BatchWalker(graph, seed, np.arange(start, stop))
        n = len(bw)
        since0 = np.zeros((n, width), dtype=np.int32)
        since1 = np.zeros((n, width), dtype=np.int32)
        rows = np.arange(n)
        while bw.active.any() and bw.time < budget:
            info = bw.step()
            hd = info.horizontal_depth
            hit = (info.horizontal != 0) & (hd >= 0) & (hd < width)
            since0[rows[hit], hd[hit]] += info.horizontal[hit]
            since1[rows[hit], hd[hit]] += info.horizontal[hit]
            active = bw.active
            since0[active & (bw.depth == 0)] = 0
            since1[active & (bw.depth == 1)] = 0
            bw.finish(bw.depth >= 1 + c)
        ok = bw.alive & bw.done
        return since0[ok] - since1[ok], int(bw.active.sum()), bw.lost

    return run


def renewal_segments(count: int, seed: int, dual: bool = False, confirmation_depth: int | None = None,
                     threads: int | None = None, first: int = 0):
    """
    Net horizontal moves per relative depth between T_0 and T_1, one row per walk.
    The rows are IID copies of the segment between any T_n and T_{n+1}.
    """
    c = _confirmation(confirmation_depth)
    parts = map_chunks(_segment_chunk(seed, dual, c, _budget(None)), count, threads=threads, first=first)
    segments = np.concatenate([s for s, _, _ in parts]) if parts else np.zeros((0, c + 2), dtype=np.int32)
    return segments, sum(e for _, e, _ in parts), sum(lost for _, _, lost in parts)


def sample_stationary_bits(
    nbits: int,
    seed: int,
    dual: bool = False,
    burn_in: int | None = None,
    confirmation_depth: int | None = None,
    threads: int | None = None,
) -> Word:
    """
    One long stationary sample: glue nbits + burn-in IID leaving segments into a single
    trajectory and read bits a_{-burn_in} .. a_{-(burn_in + nbits - 1)} of the final label.
    The last burn-in bits sit next to a leaving time and are dropped.
    """
    burn_in = _burn_in(burn_in)
    c = _confirmation(confirmation_depth)
    needed = nbits + burn_in
    width = c + 2
    totals = np.zeros(needed + width, dtype=np.int64)
    placed = 0
    next_walker = 0
    group = DEFAULT_CHUNK * resolve_threads(threads)
    while placed < needed:
        batch = min(group, needed - placed + 64)
        segments, _, _ = renewal_segments(batch, seed, dual, c, threads=threads, first=next_walker)
        next_walker += batch
        segments = segments[: needed - placed]
        k = len(segments)
        if not k:
            raise BudgetExceeded(f"none of {batch} renewal segments confirmed", walker=next_walker - batch)
        for j in range(width):
            totals[placed + j: placed + j + k] += segments[:, j]
        placed += k
    value = low_bits_from_counts(totals, 0, needed, needed) >> burn_in
    return Word(value, nbits)


# ---------------------------------------------------------------------
# Exact drift
# ---------------------------------------------------------------------

def _expected_depth_change(v: LatticeVertex, steps: int) -> Fraction:
    if steps == 0:
        return Fraction(0)
    options = neighbors_lattice(v, GraphKind.LATTICE)
    total = Fraction(0)
    for u, move in options:
        total += move.depth_change + _expected_depth_change(u, steps - 1)
    return total / len(options)


def two_step_drift_table() -> dict[str, Fraction]:
    """E[D_{t+2} − D_t | X_t] for the three vertex classes, by exhaustive enumeration."""
    z = ZeroTailProvider()

    def at(offset):
        return LatticeVertex(8, LazyDyadic(z, scale=8, offset=offset))

    classes = {
        "degree_3": at(1),
        "degree_4_up_degree_3": at(2),
        "degree_4_up_degree_4": at(4),
    }
    return {name: _expected_depth_change(v, 2) for name, v in classes.items()}
