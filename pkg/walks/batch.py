# walks/batch.py
"""
Vectorized walkers.

Each walker carries its depth, the low bits of its label (a 62-bit window), how many
of those bits are actually known, and a winding number for the wrapped graphs. Moves
are drawn from the same counter-based stream as the scalar engine, in the same edge
order, so walker i follows exactly the path that `engine.walk_step` would give it.

Labels:
- wrapped graphs (Γ̂, Γ₊, Γ̂*): the depth-d word while d <= 62, its low 62 bits below that
- rooted graphs (Γ_{…0}, dual chain from …000): the integer label, low 62 bits
A pop drops one known bit off the top of the window. A walker that needs the parity
of a label with no known bits left is retired and counted as lost.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from dyadlab.errors import DomainError
from lattice.graphs import DUAL_MOVES, PRIMAL_MOVES, GraphKind, Move, dual_root_self_loops

from .rng import uniforms, walker_keys

logger = logging.getLogger(__name__)

WINDOW = 62
WINDOW_MASK = (1 << WINDOW) - 1

L, R, D, U = (PRIMAL_MOVES.index(m) for m in (Move.L, Move.R, Move.D, Move.U))
DL, DR, DU, D0, D1 = (DUAL_MOVES.index(m) for m in (Move.L, Move.R, Move.U, Move.D0, Move.D1))

BATCH_GRAPHS = (GraphKind.WRAPPED, GraphKind.PLUS, GraphKind.LATTICE, GraphKind.DUAL, GraphKind.DUAL_CHAIN)


@dataclass
class StepInfo:
    """What happened in one batch step. `move` is -1 for walkers that did not move."""

    move: np.ndarray
    depth_before: np.ndarray
    degree_before: np.ndarray
    # net horizontal contribution of the step and the depth it belongs to; for the dual
    # graphs D1 counts as D then +1 below, and popping an odd label as -1 then up
    horizontal: np.ndarray
    horizontal_depth: np.ndarray


class BatchWalker:
    def __init__(
        self,
        graph: GraphKind | str,
        seed: int,
        walkers: np.ndarray,
        root_self_loops: bool | None = None,
    ):
        self.graph = GraphKind(graph)
        if self.graph not in BATCH_GRAPHS:
            raise DomainError(f"no batch engine for {self.graph.value}")
        self.walker_ids = np.asarray(walkers, dtype=np.uint64)
        self.keys = walker_keys(seed, self.walker_ids)
        n = len(self.walker_ids)
        self.time = 0
        self.depth = np.zeros(n, dtype=np.int64)
        self.label = np.zeros(n, dtype=np.int64)
        self.wind = np.zeros(n, dtype=np.int64)
        self.rooted = self.graph in (GraphKind.LATTICE, GraphKind.DUAL_CHAIN)
        # rooted walks start on …000, whose bits are all known
        self.valid = np.full(n, WINDOW if self.rooted else 0, dtype=np.int64)
        self.alive = np.ones(n, dtype=bool)
        self.done = np.zeros(n, dtype=bool)
        self.lost = 0
        if root_self_loops is None:
            root_self_loops = dual_root_self_loops()
        self.root_self_loops = root_self_loops

    def __len__(self):
        return len(self.walker_ids)

    @property
    def active(self) -> np.ndarray:
        return self.alive & ~self.done

    @property
    def dual(self) -> bool:
        return self.graph.is_dual

    def finish(self, mask: np.ndarray):
        """Freeze walkers (their state stays readable)."""
        self.done |= mask

    def retire(self, mask: np.ndarray, reason: str):
        mask = mask & self.alive
        count = int(mask.sum())
        if count:
            self.alive &= ~mask
            self.lost += count
            logger.warning("%d walker(s) retired at t=%d: %s", count, self.time, reason)

    # ---- one step ----
    def _modulus(self, depth: np.ndarray) -> np.ndarray:
        if self.rooted:
            return np.full(depth.shape, 1 << WINDOW, dtype=np.int64)
        return np.left_shift(np.int64(1), np.clip(depth, 0, WINDOW))

    def step(self) -> StepInfo:
        n = len(self)
        u = uniforms(self.keys, self.time)
        depth = self.depth
        known = self.valid > 0
        odd = (self.label & 1) == 1

        if self.dual:
            degree, codes, needs_parity = self._dual_menu(depth, u)
        else:
            degree, codes, needs_parity = self._primal_menu(depth, odd, known)
        self.retire(needs_parity & ~known & self.active, "label parity no longer known")

        act = self.active
        if not self.dual:
            codes = (u * degree).astype(np.int64)
        codes = np.where(act, codes, -1)

        label = self.label.copy()
        new_depth = depth.copy()
        valid = self.valid.copy()
        wind = self.wind.copy()
        horizontal = np.zeros(n, dtype=np.int64)
        hdepth = depth.copy()

        left = codes == (DL if self.dual else L)
        right = codes == (DR if self.dual else R)
        mod = self._modulus(depth)

        nxt = label + 1
        wrap = right & (nxt >= mod)
        label = np.where(right, np.where(wrap, nxt - mod, nxt), label)
        prv = self.label - 1
        wrap_l = left & (prv < 0)
        label = np.where(left, np.where(wrap_l, prv + mod, prv), label)
        if not self.rooted:
            shallow = depth <= WINDOW
            wind += (wrap & shallow).astype(np.int64) - (wrap_l & shallow).astype(np.int64)
        horizontal += right.astype(np.int64) - left.astype(np.int64)

        if self.dual:
            down = (codes == D0) | (codes == D1)
            bit = (codes == D1).astype(np.int64)
            up = codes == DU
            if not self.rooted:
                # at ∅ the dual sideways and up moves are self-loops
                up &= depth > 0
            pop_odd = up & odd
            horizontal = np.where(down, bit, horizontal)
            hdepth = np.where(down, depth + 1, hdepth)
            horizontal = np.where(pop_odd, -1, horizontal)
        else:
            down = codes == D
            bit = np.zeros(n, dtype=np.int64)
            up = codes == U

        down_mask = np.int64(WINDOW_MASK) if self.rooted else self._modulus(depth + 1) - 1
        label = np.where(down, ((self.label << 1) | bit) & down_mask, label)
        valid = np.where(down, np.minimum(valid + 1, WINDOW), valid)
        new_depth = np.where(down, depth + 1, new_depth)

        label = np.where(up, self.label >> 1, label)
        valid = np.where(up, valid - 1, valid)
        new_depth = np.where(up, depth - 1, new_depth)

        self.label, self.depth, self.valid, self.wind = label, new_depth, valid, wind
        self.time += 1
        moved = codes >= 0
        return StepInfo(
            move=codes.astype(np.int8),
            depth_before=depth,
            degree_before=degree,
            horizontal=np.where(moved, horizontal, 0),
            horizontal_depth=hdepth,
        )

    def _primal_menu(self, depth, odd, known):
        even = known & ~odd
        if self.rooted:
            can_up = even
            needs_parity = np.ones(depth.shape, dtype=bool)
        else:
            can_up = even & (depth > 0)
            needs_parity = depth > 0
        degree = np.where(can_up, 4, 3)
        return degree, None, needs_parity

    def _dual_menu(self, depth, u):
        n = len(depth)
        if self.rooted:
            degree = np.full(n, 5, dtype=np.int64)
            codes = (u * 5).astype(np.int64)
            # parity only matters for the horizontal bookkeeping of pops
            return degree, codes, np.ones(n, dtype=bool)
        at_root = depth == 0
        if self.root_self_loops:
            degree = np.full(n, 5, dtype=np.int64)
            codes = (u * 5).astype(np.int64)
        else:
            degree = np.where(at_root, 2, 5)
            codes = (u * degree).astype(np.int64)
            codes = np.where(at_root, codes + D0, codes)
        return degree, codes, np.zeros(n, dtype=bool)

    # ---- readouts ----
    def full_labels(self) -> np.ndarray:
        """True where the whole depth-d word is known (wrapped graphs, d <= 62)."""
        return (self.depth <= WINDOW) & (self.valid >= np.clip(self.depth, 0, None))

    def positions(self) -> np.ndarray:
        """wind + label / 2^depth as floats (wrapped graphs)."""
        return self.wind + self.label / np.exp2(self.depth)


# ---------------------------------------------------------------------
# Exact labels from per-depth horizontal counts
# ---------------------------------------------------------------------

def label_from_counts(counts: np.ndarray, top_depth: int, final_depth: int) -> int:
    """
    The integer Σ_d counts[d − top_depth] · 2^{final_depth − d}: the label a walk from the
    all-zero root ends on, given its net horizontal moves per depth. Exact; terms with
    d > final_depth are fractional and must add up to an integer.
    """
    h = np.ascontiguousarray(counts, dtype=np.int64)
    size = len(h)
    if size == 0:
        return 0
    width = int(np.max(np.abs(h))).bit_length() + 1
    raw = h.view(np.uint64)
    total = 0
    pad = (-size) % 8
    for b in range(width):
        plane = ((raw >> np.uint64(b)) & np.uint64(1)).astype(np.uint8)
        value = int.from_bytes(np.packbits(plane).tobytes(), "big") >> pad
        total += -(value << b) if b == width - 1 else value << b
    shift = final_depth - top_depth - (size - 1)
    if shift >= 0:
        return total << shift
    if total & ((1 << -shift) - 1):
        raise DomainError("horizontal counts do not describe an integer label")
    return total >> -shift


def low_bits_from_counts(counts: np.ndarray, top_depth: int, final_depth: int, nbits: int) -> int:
    return label_from_counts(counts, top_depth, final_depth) & ((1 << nbits) - 1)
