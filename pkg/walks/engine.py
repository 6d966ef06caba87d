# walks/engine.py
"""
Scalar simple random walk on any of the five graphs, one step at a time, with exact
positions. Slow but transparent; the batch engine reproduces it walker for walker.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from django.conf import settings

from dyadlab.emit import write_csv
from dyadlab.errors import BudgetExceeded, DomainError
from lattice.dyadic import DyadicRational
from lattice.graphs import GraphKind, LatticeVertex, Move, neighbors, root_vertex
from lattice.words import EMPTY, Word

from .rng import CounterRNG

logger = logging.getLogger(__name__)


def horizontal_step(depth: int) -> DyadicRational:
    """2^{-depth} as an exact dyadic rational (depth may be negative)."""
    if depth >= 0:
        return DyadicRational(1, depth)
    return DyadicRational(1 << -depth)


@dataclass(frozen=True)
class WalkState:
    graph: GraphKind
    vertex: Word | LatticeVertex
    rng: CounterRNG
    time: int = 0
    position: DyadicRational = field(default_factory=lambda: DyadicRational(0))
    last_move: Move | None = None

    @property
    def depth(self) -> int:
        return self.vertex.depth

    def label(self, bits: int = 16) -> str:
        if isinstance(self.vertex, Word):
            return str(self.vertex)
        return self.vertex.word(bits)


def start_state(graph: GraphKind | str, seed: int, walker: int = 0, provider=None) -> WalkState:
    """A walk at the root: ∅ for the wrapped graphs, (0, a) for the others."""
    graph = GraphKind(graph)
    vertex = EMPTY if graph in (GraphKind.WRAPPED, GraphKind.DUAL) else root_vertex(provider)
    return WalkState(graph, vertex, CounterRNG(seed, walker))


def _odd_label(vertex) -> bool:
    if isinstance(vertex, Word):
        return vertex.depth > 0 and vertex.value & 1 == 1
    return not vertex.is_even


def walk_step(s: WalkState) -> WalkState:
    options = neighbors(s.vertex, s.graph)
    vertex, move = options[s.rng.choice(s.time, len(options))]
    position = s.position
    if move is Move.L:
        position = position - horizontal_step(s.depth)
    elif move is Move.R:
        position = position + horizontal_step(s.depth)
    elif move is Move.D1:
        position = position + horizontal_step(s.depth + 1)
    elif move is Move.U and s.graph.is_dual and _odd_label(s.vertex):
        # popping an odd dual label is −1 at this depth, then up
        position = position - horizontal_step(s.depth)
    return replace(s, vertex=vertex, time=s.time + 1, position=position, last_move=move)


# ---------------------------------------------------------------------
# Leaving times
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class LevelVisit:
    level: int
    time: int
    vertex: Word | LatticeVertex
    position: DyadicRational


@dataclass
class LeavingRecord:
    """
    Leaving times T_k for k = start depth .. target, the vertex and exact position at
    each, the moves between consecutive leaving times and the increments
    K_k = position(T_k) − position(T_{k−1}).
    """

    levels: list[LevelVisit]
    segments: list[tuple[Move, ...]]
    steps: int
    confirmation_depth: int

    @property
    def increments(self) -> list[DyadicRational]:
        return [b.position - a.position for a, b in zip(self.levels, self.levels[1:])]

    @property
    def leaving_times(self) -> list[int]:
        return [v.time for v in self.levels]

    def visit(self, level: int) -> LevelVisit:
        for v in self.levels:
            if v.level == level:
                return v
        raise KeyError(level)


def run_with_leaving_times(
    s: WalkState,
    target_level: int,
    confirmation_depth: int | None = None,
    budget: int | None = None,
) -> LeavingRecord:
    """
    Walk until depth target_level + c is reached. T_k is then final for every k up to
    target_level: the walk went c levels deeper without coming back.
    """
    c = confirmation_depth if confirmation_depth is not None else settings.DYADLAB_CONFIRMATION_DEPTH
    budget = budget if budget is not None else settings.DYADLAB_STEP_BUDGET
    if c < 1:
        raise DomainError("confirmation depth must be at least 1")
    first = s.depth
    if target_level < first:
        raise DomainError(f"walk starts below level {target_level}")

    last: dict[int, LevelVisit] = {first: LevelVisit(first, s.time, s.vertex, s.position)}
    moves: list[Move] = []
    stop = target_level + c
    t0 = s.time
    while s.depth < stop:
        if s.time - t0 >= budget:
            raise BudgetExceeded(
                f"no confirmation of level {target_level} within {budget} steps",
                steps=budget,
                walker=s.rng.walker,
            )
        s = walk_step(s)
        moves.append(s.last_move)
        if first <= s.depth <= target_level:
            last[s.depth] = LevelVisit(s.depth, s.time, s.vertex, s.position)

    levels = [last[k] for k in range(first, target_level + 1)]
    segments = [tuple(moves[a.time - t0:b.time - t0]) for a, b in zip(levels, levels[1:])]
    return LeavingRecord(levels, segments, s.time - t0, c)


def dump_trajectory(s: WalkState, steps: int, path: str | Path, bits: int = 16) -> Path:
    def rows():
        state = s
        yield (state.time, state.depth, state.label(bits), "", state.position.numerator, state.position.exponent)
        for _ in range(steps):
            state = walk_step(state)
            yield (
                state.time,
                state.depth,
                state.label(bits),
                state.last_move.value,
                state.position.numerator,
                state.position.exponent,
            )

    return write_csv(path, ["t", "depth", "label", "move", "position_num", "position_exp"], rows())
