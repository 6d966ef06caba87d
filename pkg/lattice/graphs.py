# lattice/graphs.py
"""
Neighbor oracles.

Graphs:
- Γ̂ (wrapped):   vertices are Words, ∅ on top with two self-loops
- Γ₊ (plus):      vertices (m, b) with m >= 0, no up move at depth 0
- Γ_a (lattice):  vertices (m, b) for every m in ℤ, rooted at (0, a)
- Γ̂* (dual):      five moves L, R, U, D0, D1 on Words
- dual chain:     the same five moves on left-infinite labels

Every oracle lists incident edges in a fixed order (L, R, D, U for the primal graphs,
L, R, U, D0, D1 for the duals); the walk engines pick edge number floor(u * degree).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from django.conf import settings

from dyadlab.errors import DomainError

from .dyadic import BitProvider, DyadicRational, LazyDyadic, ZeroTailProvider
from .words import EMPTY, Shift, Word, word_add, word_shift


class GraphKind(str, Enum):
    WRAPPED = "wrapped"
    PLUS = "plus"
    LATTICE = "lattice"
    DUAL = "dual"
    DUAL_CHAIN = "dual_chain"

    @property
    def is_dual(self) -> bool:
        return self in (GraphKind.DUAL, GraphKind.DUAL_CHAIN)


class Move(str, Enum):
    L = "L"
    R = "R"
    U = "U"
    D = "D"
    D0 = "D0"
    D1 = "D1"

    @property
    def is_horizontal(self) -> bool:
        return self in (Move.L, Move.R)

    @property
    def depth_change(self) -> int:
        if self is Move.U:
            return -1
        if self.is_horizontal:
            return 0
        return 1

    def mirrored(self) -> "Move":
        return {Move.L: Move.R, Move.R: Move.L, Move.D0: Move.D1, Move.D1: Move.D0}.get(self, self)


PRIMAL_MOVES = (Move.L, Move.R, Move.D, Move.U)
DUAL_MOVES = (Move.L, Move.R, Move.U, Move.D0, Move.D1)


class Orientation(str, Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


@dataclass(frozen=True, slots=True)
class EdgeClass:
    orientation: Orientation
    upper: "LatticeVertex | None" = None


# ---------------------------------------------------------------------
# Vertices of Γ_a and Γ₊
# ---------------------------------------------------------------------

@dataclass(frozen=True, slots=True, eq=False)
class LatticeVertex:
    """
    A vertex (depth, label) of Γ_a. Identity is (depth, pending offset) for a shared provider.
    """

    depth: int
    label: LazyDyadic

    def __eq__(self, other):
        return isinstance(other, LatticeVertex) and self.depth == other.depth and self.label == other.label

    def __hash__(self):
        return hash((self.depth, self.label.offset))

    @property
    def is_even(self) -> bool:
        return self.label.is_even

    @property
    def position(self) -> DyadicRational:
        """
        Horizontal position relative to the root (0, a): label / 2^depth − a, exact.
        At depth m >= 0 it is offset / 2^m; above the root it also sees the cut-off bits of a.
        """
        q = self.label.offset
        if self.depth >= 0:
            return DyadicRational(q, self.depth)
        r = -self.depth
        return DyadicRational((q << r) - self.label.provider.low_bits(r))

    def word(self, bits: int = 16) -> str:
        return self.label.to_word(bits)

    def __str__(self):
        return f"({self.depth}, …{self.word(max(self.depth, 0) + 4)})"


def root_vertex(provider: BitProvider | None = None) -> LatticeVertex:
    return LatticeVertex(0, LazyDyadic(provider or ZeroTailProvider()))


# ---------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------

def neighbors_wrapped(w: Word) -> list[tuple[Word, Move]]:
    """Incident edges of w in Γ̂. ∅ lists its two self-loops once each."""
    if w.depth == 0:
        return [(EMPTY, Move.L), (EMPTY, Move.R), (word_shift(w, Shift.APPEND0), Move.D)]
    out = [
        (word_add(w, -1), Move.L),
        (word_add(w, +1), Move.R),
        (word_shift(w, Shift.APPEND0), Move.D),
    ]
    if w.is_even:
        out.append((word_shift(w, Shift.POP), Move.U))
    return out


def neighbors_lattice(v: LatticeVertex, graph: GraphKind | str = GraphKind.LATTICE) -> list[tuple[LatticeVertex, Move]]:
    graph = GraphKind(graph)
    if graph not in (GraphKind.LATTICE, GraphKind.PLUS):
        raise DomainError(f"neighbors_lattice does not serve {graph.value}")
    if graph is GraphKind.PLUS and v.depth < 0:
        raise DomainError("Γ₊ has no vertices above depth 0")
    a = v.label
    out = [
        (LatticeVertex(v.depth, a.sub1()), Move.L),
        (LatticeVertex(v.depth, a.add1()), Move.R),
        (LatticeVertex(v.depth + 1, a.mul2()), Move.D),
    ]
    if a.is_even and (graph is GraphKind.LATTICE or v.depth >= 1):
        out.append((LatticeVertex(v.depth - 1, a.div2()), Move.U))
    return out


def dual_root_self_loops() -> bool:
    return bool(getattr(settings, "DYADLAB_DUAL_ROOT_SELF_LOOPS", True))


def neighbors_dual(w: Word, root_self_loops: bool | None = None) -> list[tuple[Word, Move]]:
    """
    The five dual moves. At ∅ the sideways and up moves are self-loops, or absent when
    the root convention is switched off (then ∅ only steps down).
    """
    if root_self_loops is None:
        root_self_loops = dual_root_self_loops()
    down = [(word_shift(w, Shift.APPEND0), Move.D0), (word_shift(w, Shift.APPEND1), Move.D1)]
    if w.depth == 0:
        if not root_self_loops:
            return down
        return [(EMPTY, Move.L), (EMPTY, Move.R), (EMPTY, Move.U), *down]
    return [
        (word_add(w, -1), Move.L),
        (word_add(w, +1), Move.R),
        (word_shift(w, Shift.POP), Move.U),
        *down,
    ]


def _pop(a: LazyDyadic) -> LazyDyadic:
    return a.div2() if a.is_even else a.sub1().div2()


def neighbors_dual_chain(v: LatticeVertex) -> list[tuple[LatticeVertex, Move]]:
    """Dual moves on a left-infinite label: popping is always legal."""
    a = v.label
    return [
        (LatticeVertex(v.depth, a.sub1()), Move.L),
        (LatticeVertex(v.depth, a.add1()), Move.R),
        (LatticeVertex(v.depth - 1, _pop(a)), Move.U),
        (LatticeVertex(v.depth + 1, a.mul2()), Move.D0),
        (LatticeVertex(v.depth + 1, a.mul2().add1()), Move.D1),
    ]


def neighbors(vertex, graph: GraphKind | str):
    graph = GraphKind(graph)
    if graph is GraphKind.WRAPPED:
        return neighbors_wrapped(vertex)
    if graph is GraphKind.DUAL:
        return neighbors_dual(vertex)
    if graph is GraphKind.DUAL_CHAIN:
        return neighbors_dual_chain(vertex)
    return neighbors_lattice(vertex, graph)


def degree(vertex, graph: GraphKind | str = GraphKind.WRAPPED) -> int:
    """Number of incident edges, self-loops at ∅ counted once each."""
    graph = GraphKind(graph)
    if graph is GraphKind.WRAPPED:
        return 3 if vertex.depth == 0 or not vertex.is_even else 4
    if graph in (GraphKind.LATTICE, GraphKind.PLUS):
        if not vertex.is_even or (graph is GraphKind.PLUS and vertex.depth == 0):
            return 3
        return 4
    return len(neighbors(vertex, graph))


def reflect_word(w: Word) -> Word:
    """The nontrivial automorphism of Γ̂: v ↦ 2^n − v (mod 2^n)."""
    if w.depth == 0:
        return w
    return Word((-w.value) % (1 << w.depth), w.depth)


def complement_word(w: Word) -> Word:
    """Mirror symmetry of the dual walk: the interval of w goes to its image under x ↦ 1 − x."""
    return Word((1 << w.depth) - 1 - w.value, w.depth)
