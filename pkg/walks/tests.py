import math
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings

from dyadlab.errors import BudgetExceeded, DomainError
from lattice.dyadic import ZERO
from lattice.graphs import GraphKind, Move
from lattice.words import Word

from .batch import BatchWalker, label_from_counts
from .engine import dump_trajectory, run_with_leaving_times, start_state, walk_step
from .estimators import Estimate, merge_all
from .parallel import chunk_ranges, map_chunks
from .rng import CounterRNG, uniform, uniforms, walker_key, walker_keys
from .sampling import (
    STATIONARY_EXTRA_BLOCKS,
    depth_tail_probability,
    leaving_distribution,
    renewal_increments,
    renewal_ks_pvalues,
    run_ergodic,
    sample_dual_harmonic_histogram,
    sample_harmonic_point,
    sample_harmonic_points,
    sample_stationary_bits,
    sample_stationary_string,
    sample_stationary_strings,
    two_step_drift_table,
)

SEED = 20240611


def scalar_path(graph, walker, steps, seed=SEED):
    s = start_state(graph, seed, walker)
    path = [s]
    for _ in range(steps):
        s = walk_step(s)
        path.append(s)
    return path


class RngTests(SimpleTestCase):
    def test_int_and_array_streams_agree(self):
        walkers = np.arange(5)
        keys = walker_keys(SEED, walkers)
        for t in (0, 1, 17, 10**6):
            batch = uniforms(keys, t)
            for w in walkers:
                self.assertEqual(batch[w], uniform(walker_key(SEED, int(w)), t))

    def test_uniforms_in_unit_interval(self):
        u = uniforms(walker_keys(1, np.arange(10_000)), 3)
        self.assertTrue(((u >= 0) & (u < 1)).all())
        self.assertAlmostEqual(float(u.mean()), 0.5, delta=0.02)

    def test_choice(self):
        rng = CounterRNG(7, 3)
        self.assertEqual({rng.choice(t, 3) for t in range(200)}, {0, 1, 2})


class ScalarEngineTests(SimpleTestCase):
    def test_first_step_from_root(self):
        s = walk_step(start_state(GraphKind.WRAPPED, SEED))
        self.assertIn(s.last_move, (Move.L, Move.R, Move.D))
        self.assertEqual(s.time, 1)

    def test_leaving_record_identities(self):
        record = run_with_leaving_times(start_state(GraphKind.WRAPPED, SEED, 4), 5, confirmation_depth=8)
        times = record.leaving_times
        self.assertEqual([v.level for v in record.levels], list(range(6)))
        self.assertEqual(times, sorted(times))
        self.assertEqual(len(record.segments), 5)
        self.assertEqual(sum(len(seg) for seg in record.segments), times[-1] - times[0])
        total = sum(record.increments, ZERO)
        self.assertEqual(total, record.levels[-1].position - record.levels[0].position)
        for visit in record.levels:
            self.assertEqual(visit.vertex.depth, visit.level)

    def test_budget(self):
        with self.assertRaises(BudgetExceeded):
            run_with_leaving_times(start_state(GraphKind.WRAPPED, SEED), 10, confirmation_depth=10, budget=5)
        with self.assertRaises(DomainError):
            run_with_leaving_times(start_state(GraphKind.WRAPPED, SEED), 3, confirmation_depth=0)

    def test_dump_trajectory(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = dump_trajectory(start_state(GraphKind.DUAL, SEED), 25, Path(tmp) / "walk.csv")
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], "t,depth,label,move,position_num,position_exp")
        self.assertEqual(len(lines), 27)


class BatchEngineTests(SimpleTestCase):
    def assertSamePaths(self, graph, steps=300, walkers=4):
        bw = BatchWalker(graph, SEED, np.arange(walkers))
        paths = [scalar_path(graph, w, steps) for w in range(walkers)]
        for t in range(1, steps + 1):
            bw.step()
            for w in range(walkers):
                s = paths[w][t]
                self.assertEqual(bw.depth[w], s.depth, f"walker {w} at t={t}")
                self.assertEqual(bw.label[w], s.vertex.value, f"walker {w} at t={t}")

    def test_wrapped_matches_scalar(self):
        self.assertSamePaths(GraphKind.WRAPPED)

    def test_dual_matches_scalar(self):
        self.assertSamePaths(GraphKind.DUAL)

    @override_settings(DYADLAB_DUAL_ROOT_SELF_LOOPS=False)
    def test_dual_without_root_loops_matches_scalar(self):
        self.assertSamePaths(GraphKind.DUAL, steps=100)

    def test_wrapped_positions(self):
        bw = BatchWalker(GraphKind.WRAPPED, SEED, np.arange(3))
        for _ in range(40):
            bw.step()
        for w in range(3):
            s = scalar_path(GraphKind.WRAPPED, w, 40)[-1]
            self.assertEqual(bw.positions()[w], float(s.position))

    def test_lattice_labels_from_counts(self):
        steps, top = 200, -64
        for graph in (GraphKind.LATTICE, GraphKind.DUAL_CHAIN):
            bw = BatchWalker(graph, SEED, np.arange(3))
            counts = np.zeros((3, 64 + steps + 2), dtype=np.int64)
            for _ in range(steps):
                info = bw.step()
                counts[np.arange(3), info.horizontal_depth - top] += info.horizontal
            for w in range(3):
                s = scalar_path(graph, w, steps)[-1]
                self.assertEqual(bw.depth[w], s.depth)
                expected = s.position.to_fraction() * Fraction(2) ** s.depth
                self.assertEqual(label_from_counts(counts[w], top, s.depth), expected)

    def test_label_from_counts(self):
        self.assertEqual(label_from_counts(np.array([1, 0, 1]), 0, 2), 5)
        self.assertEqual(label_from_counts(np.array([-1, 2]), 0, 1), 0)
        self.assertEqual(label_from_counts(np.array([3]), 2, 5), 24)
        self.assertEqual(label_from_counts(np.array([1, -2, 4]), 0, 1), 2)
        with self.assertRaises(DomainError):
            label_from_counts(np.array([0, 0, 1]), 0, 1)

    def test_no_batch_for_unknown_graph(self):
        with self.assertRaises(ValueError):
            BatchWalker("tree", SEED, np.arange(2))


class EstimateTests(SimpleTestCase):
    def test_merge_matches_pooled_samples(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=500)
        pooled = Estimate.from_samples(x)
        merged = merge_all(Estimate.from_samples(part) for part in np.array_split(x, 7))
        self.assertEqual(merged.count, 500)
        self.assertAlmostEqual(merged.value, pooled.value, places=12)
        self.assertAlmostEqual(merged.stderr, pooled.stderr, places=12)

    def test_exact_and_within(self):
        e = Estimate.exact(0.25)
        self.assertEqual(e.stderr, 0.0)
        self.assertTrue(e.within(0.25))
        self.assertFalse(Estimate.from_samples([0, 1] * 50).within(0.9))

    def test_chunks(self):
        self.assertEqual(chunk_ranges(5, 2), [(0, 2), (2, 4), (4, 5)])
        self.assertEqual(map_chunks(lambda a, b: (a, b), 3, chunk_size=2, threads=2, first=10), [(10, 12), (12, 13)])


class SamplingTests(SimpleTestCase):
    def test_two_step_drift_table(self):
        self.assertEqual(
            two_step_drift_table(),
            {
                "degree_3": Fraction(1, 3),
                "degree_4_up_degree_3": Fraction(1, 4),
                "degree_4_up_degree_4": Fraction(1, 6),
            },
        )

    def test_ergodic_run_ignores_thread_count(self):
        one = run_ergodic(GraphKind.WRAPPED, 60_000, SEED, walkers=512, threads=1)
        two = run_ergodic(GraphKind.WRAPPED, 60_000, SEED, walkers=512, threads=2)
        self.assertEqual(one.p3, two.p3)
        self.assertEqual(one.speed, two.speed)
        self.assertTrue(0 < one.p3.value < 1)
        self.assertGreater(one.speed.value, 0)

    def test_ergodic_needs_enough_steps(self):
        with self.assertRaises(DomainError):
            run_ergodic(GraphKind.WRAPPED, 500, SEED)

    def test_dual_speed_is_one_fifth(self):
        result = run_ergodic(GraphKind.DUAL, 400_000, SEED, walkers=400)
        self.assertTrue(result.speed.within(0.2, sigmas=4), str(result.speed))

    def test_depth_tail_obeys_hoeffding_bound(self):
        for t in (50, 100):
            est = depth_tail_probability(t, 2000, SEED)
            self.assertEqual(est.count, 2000)
            self.assertLessEqual(est.value, math.exp(-t / 1152))
        self.assertEqual(depth_tail_probability(0, 10, SEED).value, 1.0)

    def test_leaving_distribution(self):
        dist = leaving_distribution(2, 2000, SEED, confirmation_depth=12)
        self.assertEqual(len(dist.masses), 4)
        self.assertAlmostEqual(float(dist.masses.sum()), 1.0)
        self.assertEqual(dist.samples + dist.exceeded + dist.lost, 2000)
        self.assertEqual(next(dist.csv_rows())[0], "00")
        with self.assertRaises(DomainError):
            leaving_distribution(0, 10, SEED)

    def test_harmonic_point_matches_scalar_walk(self):
        for walker in range(3):
            record = run_with_leaving_times(start_state(GraphKind.WRAPPED, SEED, walker), 16, confirmation_depth=10)
            point = sample_harmonic_point(16, SEED, walker=walker, confirmation_depth=10)
            self.assertEqual(point, record.visit(16).position.mod1())
            sample = sample_harmonic_points(16, 1, SEED, confirmation_depth=10, first=walker)
            self.assertEqual(int(sample.first_increments[0]), record.increments[0].to_fraction() * 2)

    def test_plus_positions_carry_winding(self):
        record = run_with_leaving_times(start_state(GraphKind.PLUS, SEED, 1), 16, confirmation_depth=10)
        point = sample_harmonic_point(16, SEED, walker=1, graph=GraphKind.PLUS, confirmation_depth=10)
        self.assertEqual(point, record.visit(16).position)

    def test_harmonic_window_limit(self):
        with self.assertRaises(DomainError):
            sample_harmonic_points(30, 10, SEED, confirmation_depth=40)
        with self.assertRaises(DomainError):
            sample_harmonic_points(16, 10, SEED, graph=GraphKind.LATTICE)

    def test_harmonic_points_need_depth_sixteen(self):
        for depth in (0, 1, 15):
            with self.assertRaises(DomainError):
                sample_harmonic_points(depth, 10, SEED, confirmation_depth=10)
        with self.assertRaises(DomainError):
            sample_harmonic_point(8, SEED, confirmation_depth=10)
        sample = sample_harmonic_points(16, 20, SEED, confirmation_depth=10)
        self.assertEqual(len(sample.first_increments), sample.samples)

    def test_harmonic_histogram(self):
        sample = sample_harmonic_points(16, 500, SEED, confirmation_depth=12)
        counts = sample.histogram_counts(3)
        self.assertEqual(len(counts), 8)
        self.assertEqual(int(counts.sum()), sample.samples)
        self.assertTrue(((sample.positions() >= 0) & (sample.positions() < 1)).all())
        self.assertLess(sample.error_bound, 1.0)

    def test_dual_harmonic_histogram_is_uniform(self):
        result = sample_dual_harmonic_histogram(3, 4000, SEED)
        self.assertEqual(int(result.counts.sum()), 4000)
        self.assertGreater(result.pvalue, 1e-3)

    def test_renewal_increments_share_a_law(self):
        increments = renewal_increments((1, 2), samples=3000, seed=SEED, confirmation_depth=12)
        self.assertTrue((increments[1] > 0).all())
        self.assertGreater(renewal_ks_pvalues(increments)["1-2"], 1e-3)

    def test_stationary_string_matches_scalar_walk(self):
        length, burn_in = 3, 2
        block = 9 * (2 * length + burn_in)
        for walker in range(8):
            path = scalar_path(GraphKind.LATTICE, walker, block * (1 + STATIONARY_EXTRA_BLOCKS))
            ends = [path[block * k] for k in range(1, 2 + STATIONARY_EXTRA_BLOCKS)]
            reached = [s for s in ends if s.depth >= 2 * length]
            if not reached:
                with self.assertRaises(BudgetExceeded):
                    sample_stationary_string(length, SEED, walker=walker, burn_in=burn_in)
                continue
            word = sample_stationary_string(length, SEED, walker=walker, burn_in=burn_in)
            self.assertEqual(word, Word(reached[0].vertex.label.low_bits(length), length))

    def test_shallow_stationary_walkers_are_kept(self):
        sample = sample_stationary_strings(3, 400, SEED, burn_in=0)
        self.assertEqual(len(sample.values) + sample.exceeded + sample.lost, 400)
        self.assertLess(sample.exceeded, 4)
        self.assertGreater(len(sample.values), 390)

    def test_stationary_strings(self):
        sample = sample_stationary_strings(4, 300, SEED, burn_in=4)
        self.assertEqual(len(sample.values) + sample.exceeded + sample.lost, 300)
        self.assertTrue(all(0 <= v < 16 for v in sample.values))

    def test_dual_stationary_bits_are_fair(self):
        sample = sample_stationary_strings(2, 2000, SEED, dual=True, burn_in=4)
        for index in (0, 1):
            freq = sample.bit_frequency(index)
            self.assertTrue(freq.within(0.5, sigmas=4), str(freq))

    def test_long_stationary_bits(self):
        word = sample_stationary_bits(200, SEED, burn_in=8, confirmation_depth=10)
        self.assertEqual(word.depth, 200)
        again = sample_stationary_bits(200, SEED, burn_in=8, confirmation_depth=10)
        self.assertEqual(word, again)
        bits = word.bits
        self.assertTrue(0 < sum(bits) < 200)
