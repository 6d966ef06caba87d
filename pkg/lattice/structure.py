# lattice/structure.py
"""
Structure recovery on Γ_a: from an unlabeled neighbor oracle, tell horizontal edges
from vertical ones, find which end of a vertical edge is upper, and read the root
label back from degree queries alone.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import networkx as nx

from dyadlab.emit import write_csv
from dyadlab.errors import InsufficientContext, StructureError

from .dyadic import BitProvider, LazyDyadic
from .graphs import GraphKind, LatticeVertex, Move, Orientation, neighbors_lattice, root_vertex
from .words import Word

logger = logging.getLogger(__name__)

CLASSIFY_RADIUS = 3
# walks from the upper end of a vertical edge to its lower end
ORIENT_PATTERN = (Orientation.HORIZONTAL, Orientation.VERTICAL, Orientation.HORIZONTAL, Orientation.HORIZONTAL)


class BoundedOracle:
    """
    Neighbor oracle for Γ_a that only answers inside a depth window.
    Asking about a vertex outside [min_depth, max_depth] raises InsufficientContext.
    """

    def __init__(self, provider: BitProvider, min_depth: int = -8, max_depth: int = 24):
        if min_depth > 0 or max_depth < 0:
            raise ValueError("the window must contain the root depth 0")
        self.root = root_vertex(provider)
        self.min_depth = min_depth
        self.max_depth = max_depth
        self._neighbors: dict[LatticeVertex, list[tuple[LatticeVertex, Move]]] = {}
        self._classes: dict[frozenset, Orientation] = {}
        self.queries = 0

    def _check(self, v: LatticeVertex):
        if not self.min_depth <= v.depth <= self.max_depth:
            raise InsufficientContext(f"vertex at depth {v.depth} is outside [{self.min_depth}, {self.max_depth}]")

    def neighbors(self, v: LatticeVertex) -> list[tuple[LatticeVertex, Move]]:
        """Labeled neighbors; only read_root_bits and the ground-truth labeling look at the moves."""
        self._check(v)
        found = self._neighbors.get(v)
        if found is None:
            self.queries += 1
            found = neighbors_lattice(v, GraphKind.LATTICE)
            self._neighbors[v] = found
        return found

    def adjacent(self, v: LatticeVertex) -> list[LatticeVertex]:
        return [u for u, _ in self.neighbors(v)]

    def degree(self, v: LatticeVertex) -> int:
        return len(self.neighbors(v))

    def move(self, v: LatticeVertex, move: Move) -> LatticeVertex:
        for u, m in self.neighbors(v):
            if m is move:
                return u
        raise StructureError(f"{v} has no {move.value} move")

    def ball(self, center: LatticeVertex, radius: int, avoid: LatticeVertex | None = None) -> nx.Graph:
        """Breadth-first ball of the given radius, with `avoid` deleted from the graph."""
        graph = nx.Graph()
        graph.add_node(center)
        seen = {center}
        frontier = [center]
        for _ in range(radius):
            nxt = []
            for v in frontier:
                for u in self.adjacent(v):
                    if u == avoid:
                        continue
                    graph.add_edge(v, u)
                    if u not in seen:
                        seen.add(u)
                        nxt.append(u)
            frontier = nxt
        return graph


def avoiding_distance(
    x: LatticeVertex,
    z: LatticeVertex,
    avoid: LatticeVertex,
    oracle: BoundedOracle,
    radius: int,
) -> int | None:
    """Length of the shortest x–z path that never visits `avoid`, or None if it exceeds `radius`."""
    ball = oracle.ball(x, radius, avoid=avoid)
    if z not in ball:
        return None
    return nx.shortest_path_length(ball, x, z)


def classify_edge(u: LatticeVertex, v: LatticeVertex, oracle: BoundedOracle) -> Orientation:
    key = frozenset((u, v))
    cached = oracle._classes.get(key)
    if cached is not None:
        return cached

    du, dv = oracle.degree(u), oracle.degree(v)
    if du == 4 and dv == 4:
        result = Orientation.VERTICAL
    elif du == 3 and dv == 3:
        raise StructureError(f"edge {u}–{v} joins two degree-3 vertices")
    else:
        x, y = (u, v) if du == 3 else (v, u)
        strong = [n for n in oracle.adjacent(y) if oracle.degree(n) == 4]
        if len(strong) >= 2:
            result = Orientation.HORIZONTAL
        elif not strong:
            raise StructureError(f"{y} has no degree-4 neighbor")
        else:
            near = avoiding_distance(x, strong[0], y, oracle, CLASSIFY_RADIUS)
            result = Orientation.HORIZONTAL if near is not None else Orientation.VERTICAL

    oracle._classes[key] = result
    return result


def _pattern_count(src: LatticeVertex, dst: LatticeVertex, oracle: BoundedOracle) -> int:
    walks = Counter({src: 1})
    for step in ORIENT_PATTERN:
        nxt = Counter()
        for v, count in walks.items():
            for u in oracle.adjacent(v):
                if classify_edge(v, u, oracle) is step:
                    nxt[u] += count
        walks = nxt
    return walks.get(dst, 0)


def orient_vertical_edge(u: LatticeVertex, v: LatticeVertex, oracle: BoundedOracle) -> LatticeVertex:
    """Return the upper endpoint of the vertical edge u–v."""
    from_u = _pattern_count(u, v, oracle)
    from_v = _pattern_count(v, u, oracle)
    if (from_u, from_v) == (2, 0):
        return u
    if (from_u, from_v) == (0, 2):
        return v
    raise StructureError(f"vertical edge {u}–{v}: pattern counts {from_u} and {from_v}")


def read_root_bits(oracle: BoundedOracle, k: int) -> Word:
    """
    Read a_0, a_{-1}, ..., a_{-k+1} off the graph, first bit first: at a degree-4 vertex
    emit 0 and go up, at a degree-3 vertex emit 1, step left, then go up.
    """
    v = oracle.root
    bits = []
    for _ in range(k):
        if oracle.degree(v) == 4:
            bits.append(0)
        else:
            bits.append(1)
            v = oracle.move(v, Move.L)
        v = oracle.move(v, Move.U)
    return Word.from_bits(bits)


def has_nontrivial_automorphisms(provider: BitProvider) -> bool:
    """Γ_a has a nontrivial automorphism iff a is eventually periodic."""
    return provider.is_eventually_periodic()


# ---------------------------------------------------------------------
# Ground truth and round trips
# ---------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class EdgeRecord:
    u: LatticeVertex
    v: LatticeVertex
    orientation: Orientation
    upper: LatticeVertex | None = None


def window_edges(
    oracle: BoundedOracle,
    start: LatticeVertex,
    radius: int,
    depth_range: tuple[int, int],
) -> list[EdgeRecord]:
    """Edges of the ball around `start` with both ends in depth_range, labeled from the moves."""
    lo, hi = depth_range
    records = {}
    seen = {start}
    frontier = [start]
    for _ in range(radius):
        nxt = []
        for v in frontier:
            for u, move in oracle.neighbors(v):
                if not (lo <= u.depth <= hi):
                    continue
                key = frozenset((u, v))
                if key not in records:
                    if move.is_horizontal:
                        records[key] = EdgeRecord(v, u, Orientation.HORIZONTAL)
                    else:
                        records[key] = EdgeRecord(v, u, Orientation.VERTICAL, v if move is Move.D else u)
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        frontier = nxt
    return list(records.values())


@dataclass
class RecoveryReport:
    edges: int = 0
    vertical: int = 0
    classify_mismatches: int = 0
    orient_mismatches: int = 0
    bits_checked: int = 0
    bit_mismatches: int = 0

    @property
    def ok(self) -> bool:
        return not (self.classify_mismatches or self.orient_mismatches or self.bit_mismatches)

    def merge(self, other: "RecoveryReport") -> "RecoveryReport":
        return RecoveryReport(*(getattr(self, f) + getattr(other, f) for f in self.__dataclass_fields__))


def structure_window(
    provider: BitProvider,
    radius: int = 4,
    depth_range: tuple[int, int] = (2, 12),
) -> tuple[BoundedOracle, list[EdgeRecord]]:
    """An oracle with room around depth_range, and the labeled edges near the descendant of the root at its top."""
    oracle = BoundedOracle(provider, min_depth=min(depth_range[0] - 12, 0), max_depth=depth_range[1] + 12)
    start = LatticeVertex(depth_range[0], _descend(provider, depth_range[0]))
    return oracle, window_edges(oracle, start, radius, depth_range)


def recover_structure(
    provider: BitProvider,
    radius: int = 4,
    depth_range: tuple[int, int] = (2, 12),
    root_bits: int = 64,
) -> RecoveryReport:
    """Run classify/orient over a window and read back the root bits; count disagreements."""
    report = RecoveryReport()
    oracle, edges = structure_window(provider, radius, depth_range)
    for edge in edges:
        report.edges += 1
        got = classify_edge(edge.u, edge.v, oracle)
        if got is not edge.orientation:
            report.classify_mismatches += 1
            continue
        if got is Orientation.VERTICAL:
            report.vertical += 1
            if orient_vertical_edge(edge.u, edge.v, oracle) != edge.upper:
                report.orient_mismatches += 1

    if root_bits:
        read = read_root_bits(BoundedOracle(provider, min_depth=-root_bits, max_depth=1), root_bits)
        expected = Word.from_bits(provider.bit_at(i) for i in range(root_bits))
        report.bits_checked = root_bits
        report.bit_mismatches = sum(a != b for a, b in zip(read.bits, expected.bits))

    if not report.ok:
        logger.warning("structure recovery disagrees for %r: %s", provider, report)
    return report


def _descend(provider: BitProvider, depth: int) -> LazyDyadic:
    label = LazyDyadic(provider)
    for _ in range(depth):
        label = label.mul2()
    return label


def dump_edges(records: list[EdgeRecord], path: str | Path, bits: int = 16) -> Path:
    rows = (
        (
            r.u.depth,
            r.u.word(bits),
            r.v.depth,
            r.v.word(bits),
            r.orientation.value,
            "" if r.upper is None else ("u" if r.upper == r.u else "v"),
        )
        for r in records
    )
    return write_csv(path, ["depth_u", "label_u", "depth_v", "label_v", "class", "upper"], rows)
