import random
import tempfile
from fractions import Fraction
from pathlib import Path

from django.test import SimpleTestCase

from dyadlab.errors import DomainError, InsufficientContext, ParityError

from .dyadic import (
    DyadicRational,
    LazyDyadic,
    LazyOp,
    PeriodicTailProvider,
    SeededTailProvider,
    ZeroTailProvider,
    lazy_arith,
    provider_from_dict,
)
from .graphs import (
    GraphKind,
    LatticeVertex,
    Move,
    Orientation,
    complement_word,
    degree,
    neighbors_dual,
    neighbors_dual_chain,
    neighbors_lattice,
    neighbors_wrapped,
    reflect_word,
    root_vertex,
)
from .structure import (
    BoundedOracle,
    avoiding_distance,
    classify_edge,
    dump_edges,
    has_nontrivial_automorphisms,
    orient_vertical_edge,
    read_root_bits,
    recover_structure,
    window_edges,
)
from .words import EMPTY, Shift, Word, position_of, word_add, word_shift, words_at_depth


def W(text):
    return Word.parse(text)


def vertex(provider, depth, offset):
    label = LazyDyadic(provider, shift=max(-depth, 0), scale=max(depth, 0), offset=offset)
    return LatticeVertex(depth, label)


def step(v, move):
    return dict((m, u) for u, m in neighbors_lattice(v))[move]


class WordTests(SimpleTestCase):
    def test_parse_and_render(self):
        self.assertEqual(W("011"), Word(3, 3))
        self.assertEqual(str(W("011")), "011")
        self.assertIs(W("~"), EMPTY)
        self.assertEqual(str(EMPTY), "~")
        with self.assertRaises(DomainError):
            W("012")

    def test_word_add(self):
        self.assertEqual(word_add(W("111"), +1), W("000"))
        self.assertEqual(word_add(W("000"), -1), W("111"))
        self.assertEqual(word_add(W("0110"), +1), W("0111"))
        with self.assertRaises(DomainError):
            word_add(EMPTY, +1)

    def test_word_add_cycles(self):
        for w in words_at_depth(4):
            self.assertEqual(word_add(word_add(w, +1), -1), w)
            x = w
            for _ in range(16):
                x = word_add(x, +1)
            self.assertEqual(x, w)

    def test_word_shift(self):
        self.assertEqual(word_shift(W("00"), Shift.APPEND0), W("000"))
        self.assertEqual(word_shift(W("10"), Shift.POP), W("1"))
        self.assertEqual(word_shift(EMPTY, "append0"), W("0"))
        with self.assertRaises(DomainError):
            word_shift(EMPTY, Shift.POP)

    def test_position_of(self):
        self.assertEqual(position_of(W("01")), DyadicRational(1, 2))
        self.assertEqual(position_of(W("0100")), DyadicRational(1, 2))
        self.assertEqual(position_of(EMPTY), DyadicRational(0))
        for w in words_at_depth(5):
            self.assertEqual(position_of(word_shift(w, Shift.APPEND0)), position_of(w))
            delta = (position_of(word_add(w, +1)) - position_of(w)).mod1()
            self.assertEqual(delta, DyadicRational(1, 5))
            if w.value:
                mirrored = position_of(reflect_word(w))
                self.assertEqual(mirrored, DyadicRational(1) - position_of(w))


class DyadicRationalTests(SimpleTestCase):
    def test_canonical_form(self):
        self.assertEqual(DyadicRational(4, 3), DyadicRational(1, 1))
        self.assertEqual(DyadicRational(0, 7).exponent, 0)
        self.assertEqual(str(DyadicRational(6, 4)), "3/2^3")

    def test_exact_arithmetic(self):
        a = DyadicRational(1, 2) + DyadicRational(3, 5)
        self.assertEqual(a.to_fraction(), Fraction(1, 4) + Fraction(3, 32))
        self.assertEqual((a - a), DyadicRational(0))
        self.assertLess(DyadicRational(1, 3), DyadicRational(1, 2))
        self.assertEqual(DyadicRational(-1, 2).mod1(), DyadicRational(3, 2))
        self.assertEqual(DyadicRational.from_fraction(Fraction(5, 8)), DyadicRational(5, 3))
        with self.assertRaises(DomainError):
            DyadicRational.from_fraction(Fraction(1, 3))


class LazyDyadicTests(SimpleTestCase):
    def test_carries_through_long_runs_of_ones(self):
        a = LazyDyadic(ZeroTailProvider("0011"))
        self.assertEqual(a.add1().to_word(4), "0100")
        ones = LazyDyadic(PeriodicTailProvider("", "1"))
        self.assertEqual(ones.add1().to_word(16), "0" * 16)
        b = LazyDyadic(ZeroTailProvider("0010"))
        self.assertEqual(b.div2().to_word(4), "0001")

    def test_div2_of_odd_raises(self):
        with self.assertRaises(ParityError):
            LazyDyadic(ZeroTailProvider("1")).div2()
        with self.assertRaises(ParityError):
            LazyDyadic(ZeroTailProvider("10")).mul2().add1().div2()

    def test_matches_big_integer_arithmetic(self):
        rng = random.Random(20240611)
        for seed in range(25):
            provider = SeededTailProvider("", seed)
            lazy = LazyDyadic(provider)
            exact, valid = provider.low_bits(128), 128
            for _ in range(60):
                op = rng.choice(list(LazyOp))
                if op is LazyOp.DIV2 and exact & 1:
                    with self.assertRaises(ParityError):
                        lazy_arith(lazy, op)
                    op = LazyOp.ADD1
                lazy = lazy_arith(lazy, op)
                if op is LazyOp.ADD1:
                    exact += 1
                elif op is LazyOp.SUB1:
                    exact -= 1
                elif op is LazyOp.MUL2:
                    exact, valid = exact * 2, valid + 1
                else:
                    exact, valid = exact // 2, valid - 1
                exact %= 1 << valid
                k = min(valid, 64)
                self.assertEqual(lazy.low_bits(k), exact % (1 << k))

    def test_seeded_provider_is_repeatable(self):
        a = SeededTailProvider("101", 7)
        b = SeededTailProvider("101", 7)
        a.low_bits(10)
        self.assertEqual(a.low_bits(300), b.low_bits(300))
        self.assertEqual(a.low_bits(3), 0b101)
        self.assertNotEqual(SeededTailProvider("101", 8).low_bits(64), b.low_bits(64))

    def test_periodic_tail_bits(self):
        p = PeriodicTailProvider("1", "01")
        # ...0101 01 1
        self.assertEqual([p.bit(-k) for k in range(7)], [1, 1, 0, 1, 0, 1, 0])

    def test_provider_json_round_trip(self):
        for provider in (ZeroTailProvider("11"), PeriodicTailProvider("0", "110"), SeededTailProvider("1", 99)):
            self.assertEqual(provider_from_dict(provider.to_dict()), provider)


class GraphTests(SimpleTestCase):
    def test_wrapped_neighbors(self):
        self.assertEqual(
            set(neighbors_wrapped(W("10"))),
            {(W("11"), Move.R), (W("01"), Move.L), (W("100"), Move.D), (W("1"), Move.U)},
        )
        self.assertEqual(neighbors_wrapped(W("1")), [(W("0"), Move.L), (W("0"), Move.R), (W("10"), Move.D)])
        self.assertEqual(neighbors_wrapped(EMPTY), [(EMPTY, Move.L), (EMPTY, Move.R), (W("0"), Move.D)])

    def test_degree_rule(self):
        self.assertEqual(degree(EMPTY), 3)
        for depth in range(1, 11):
            for w in words_at_depth(depth):
                self.assertEqual(degree(w), 4 if w.value % 2 == 0 else 3)
                self.assertEqual(len(neighbors_wrapped(w)), degree(w))

    def test_reflection_is_an_automorphism(self):
        for depth in range(0, 8):
            for w in words_at_depth(depth):
                self.assertEqual(reflect_word(reflect_word(w)), w)
                image = sorted((reflect_word(u), m.mirrored()) for u, m in neighbors_wrapped(w))
                self.assertEqual(sorted(neighbors_wrapped(reflect_word(w))), image)
        self.assertEqual(reflect_word(W("1000")), W("1000"))
        self.assertEqual(reflect_word(W("01")), W("11"))
        self.assertEqual(reflect_word(EMPTY), EMPTY)

    def test_lattice_neighbors(self):
        z = ZeroTailProvider()
        root = root_vertex(z)
        self.assertEqual(len(neighbors_lattice(root, GraphKind.LATTICE)), 4)
        self.assertIn((vertex(z, -1, 0), Move.U), neighbors_lattice(root, GraphKind.LATTICE))
        self.assertEqual(len(neighbors_lattice(root, GraphKind.PLUS)), 3)
        odd = vertex(z, 1, 3)
        self.assertEqual(
            {u for u, _ in neighbors_lattice(odd)},
            {vertex(z, 1, 2), vertex(z, 1, 4), vertex(z, 2, 6)},
        )
        self.assertEqual(degree(odd, GraphKind.LATTICE), 3)

    def test_lattice_positions(self):
        z = ZeroTailProvider()
        self.assertEqual(vertex(z, 2, 1).position, DyadicRational(1, 2))
        self.assertEqual(vertex(z, 4, 4).position, DyadicRational(1, 2))
        # a = ...1010: up, right (a step of 2 at depth -1), up, then back down
        v = step(root_vertex(PeriodicTailProvider("", "10")), Move.U)
        v = step(v, Move.R)
        self.assertEqual(v.position, DyadicRational(2))
        v = step(v, Move.U)
        self.assertEqual(v.depth, -2)
        self.assertEqual(v.position, DyadicRational(2))
        v = step(step(v, Move.D), Move.D)
        self.assertEqual((v.depth, v.position), (0, DyadicRational(2)))

    def test_dual_neighbors(self):
        self.assertEqual(
            neighbors_dual(W("1")),
            [(W("0"), Move.L), (W("0"), Move.R), (EMPTY, Move.U), (W("10"), Move.D0), (W("11"), Move.D1)],
        )
        self.assertEqual(
            neighbors_dual(EMPTY, root_self_loops=True),
            [(EMPTY, Move.L), (EMPTY, Move.R), (EMPTY, Move.U), (W("0"), Move.D0), (W("1"), Move.D1)],
        )
        self.assertEqual(neighbors_dual(EMPTY, root_self_loops=False), [(W("0"), Move.D0), (W("1"), Move.D1)])

    def test_dual_mirror_symmetry(self):
        for root_self_loops in (True, False):
            for depth in range(0, 7):
                for w in words_at_depth(depth):
                    image = sorted((complement_word(u), m.mirrored()) for u, m in neighbors_dual(w, root_self_loops))
                    self.assertEqual(sorted(neighbors_dual(complement_word(w), root_self_loops)), image)

    def test_dual_chain_has_five_moves(self):
        v = root_vertex(SeededTailProvider("", 3))
        moves = neighbors_dual_chain(v)
        self.assertEqual([m for _, m in moves], [Move.L, Move.R, Move.U, Move.D0, Move.D1])
        self.assertEqual(degree(v, GraphKind.DUAL_CHAIN), 5)


class StructureTests(SimpleTestCase):
    def setUp(self):
        self.z = ZeroTailProvider()
        self.oracle = BoundedOracle(self.z, min_depth=-12, max_depth=16)

    def test_classify_examples(self):
        v = lambda d, q: vertex(self.z, d, q)
        self.assertIs(classify_edge(v(0, 0), v(1, 0), self.oracle), Orientation.VERTICAL)
        self.assertIs(classify_edge(v(0, 0), v(0, 1), self.oracle), Orientation.HORIZONTAL)
        self.assertIs(classify_edge(v(0, 1), v(1, 2), self.oracle), Orientation.VERTICAL)

    def test_vertical_avoiding_distance_is_six(self):
        v = lambda d, q: vertex(self.z, d, q)
        self.assertEqual(avoiding_distance(v(0, 1), v(2, 4), v(1, 2), self.oracle, radius=8), 6)

    def test_orient_examples(self):
        v = lambda d, q: vertex(self.z, d, q)
        self.assertEqual(orient_vertical_edge(v(0, 0), v(1, 0), self.oracle), v(0, 0))
        self.assertEqual(orient_vertical_edge(v(1, 2), v(0, 1), self.oracle), v(0, 1))

    def test_bounded_oracle_refuses_outside_window(self):
        oracle = BoundedOracle(self.z, min_depth=-1, max_depth=1)
        with self.assertRaises(InsufficientContext):
            oracle.neighbors(vertex(self.z, 2, 0))

    def test_read_root_bits(self):
        zeros = read_root_bits(BoundedOracle(self.z, min_depth=-16, max_depth=1), 16)
        self.assertEqual(str(zeros), "0" * 16)
        alternating = read_root_bits(BoundedOracle(PeriodicTailProvider("", "01"), min_depth=-8, max_depth=1), 8)
        self.assertEqual(str(alternating), "10101010")
        seeded = SeededTailProvider("", 12345)
        bits = read_root_bits(BoundedOracle(seeded, min_depth=-64, max_depth=1), 64)
        self.assertEqual(bits.bits, tuple(seeded.bit_at(i) for i in range(64)))

    def test_recovery_round_trip(self):
        for seed in range(3):
            report = recover_structure(SeededTailProvider("", seed), radius=3, depth_range=(2, 8), root_bits=32)
            self.assertTrue(report.ok, report)
            self.assertGreater(report.vertical, 0)

    def test_automorphism_predicate(self):
        self.assertTrue(has_nontrivial_automorphisms(ZeroTailProvider("101")))
        self.assertTrue(has_nontrivial_automorphisms(PeriodicTailProvider("", "01")))
        self.assertFalse(has_nontrivial_automorphisms(SeededTailProvider("", 1)))

    def test_dump_edges(self):
        start = vertex(self.z, 2, 0)
        records = window_edges(self.oracle, start, 1, (2, 3))
        with tempfile.TemporaryDirectory() as tmp:
            path = dump_edges(records, Path(tmp) / "edges.csv")
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], "depth_u,label_u,depth_v,label_v,class,upper")
        self.assertEqual(len(lines), 1 + len(records))
