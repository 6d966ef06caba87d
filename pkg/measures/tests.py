import tempfile
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from dyadlab.emit import emit
from dyadlab.errors import DegenerateLevel, DomainError, FitWarning, ResolutionError, SolverError
from lattice.words import Word

from .chains import (
    chain_step,
    dense_stationary,
    dual_stationary_invariance_check,
    stationary_histogram,
    stationary_trend,
    truncated_stationary,
)
from .crest import (
    CrestField,
    crest_series,
    dense_crest_oracle,
    esc_p3_convert,
    extrapolate_ratio2,
    normalize_level,
    solve_crest,
)
from .histograms import (
    DyadicHistogram,
    dual_harmonic_exact,
    g_derivative,
    g_profile,
    harmonic_histogram,
    singularity_report,
    substring_density,
    two_bit_statistics,
)
from .increments import k1_law, k1_truncation_tv


class CrestTests(SimpleTestCase):
    def test_two_level_closed_form(self):
        f = solve_crest(2)
        self.assertAlmostEqual(f.value("0"), 3 / 8, places=12)
        self.assertAlmostEqual(f.value("1"), 1 / 4, places=12)
        self.assertEqual(f.value(Word.parse("")), 1.0)
        self.assertEqual(f.value("00"), 0.0)

    def test_matches_dense_oracle(self):
        for n in (2, 3, 5):
            f = solve_crest(n, tol=1e-13)
            dense = dense_crest_oracle(n)
            for d in range(n + 1):
                np.testing.assert_allclose(f.level(d), dense[d], atol=1e-11)

    def test_maximum_principle_and_monotonicity(self):
        small, big = solve_crest(5), solve_crest(6)
        for d in range(1, 5):
            self.assertTrue(((big.level(d) >= 0) & (big.level(d) <= 1)).all())
            self.assertTrue((big.level(d) >= small.level(d) - 1e-12).all())
        self.assertLess(big.value("0") + big.value("1"), 1.0)
        self.assertGreater(big.value("0") + big.value("1"), small.value("0") + small.value("1"))

    def test_normalize_level(self):
        f = solve_crest(2)
        np.testing.assert_allclose(normalize_level(f, 1), [0.6, 0.4])
        self.assertAlmostEqual(float(f.normalized(1).sum()), 1.0, places=15)
        with self.assertRaises(DomainError):
            normalize_level(f, 2)
        flat = CrestField(3, [np.ones(1), np.zeros(2), np.zeros(4), np.zeros(8)], 1e-12)
        with self.assertRaises(DegenerateLevel):
            normalize_level(flat, 1)

    def test_solver_error_carries_residual(self):
        with self.assertRaises(SolverError) as ctx:
            solve_crest(10, tol=1e-14, max_iter=2)
        self.assertGreater(ctx.exception.residual, 1e-14)

    def test_depth_range(self):
        with self.assertRaises(DomainError):
            solve_crest(1)
        with self.assertRaises(DomainError):
            solve_crest(23)

    def test_extrapolate_exact_model(self):
        fit = extrapolate_ratio2([1 - 2.0 ** -n for n in range(2, 16)])
        self.assertAlmostEqual(fit.limit, 1.0, places=12)
        self.assertAlmostEqual(fit.slope, 1.0, places=9)
        self.assertTrue(fit.monotone)
        self.assertEqual(fit.window, (2, 15))

    def test_extrapolate_flags_non_monotone_window(self):
        with self.assertWarns(FitWarning):
            fit = extrapolate_ratio2([0.1, 0.3, 0.2, 0.4, 0.35])
        self.assertFalse(fit.monotone)
        with self.assertRaises(DomainError):
            extrapolate_ratio2([1, 2, 3])

    def test_esc_p3_conversion(self):
        self.assertEqual(esc_p3_convert(Fraction(3, 8), "p3_to_esc"), Fraction(5, 9))
        self.assertEqual(esc_p3_convert(esc_p3_convert(Fraction(2, 7))), Fraction(2, 7))
        self.assertAlmostEqual(esc_p3_convert(0.547846), 0.382333, delta=1e-6)
        with self.assertRaises(DomainError):
            esc_p3_convert(1.5)

    def test_crest_series(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FitWarning)
            series = crest_series(10)
        self.assertEqual(series.depths, list(range(2, 11)))
        self.assertAlmostEqual(series.esc0, 0.547846, delta=1e-2)
        self.assertTrue(np.all(np.diff(series.raw_sum) > 0))
        self.assertLess(series.relations()["esc0_plus_esc1"], 1e-9)
        with tempfile.TemporaryDirectory() as tmp:
            path = emit(series, "csv", Path(tmp) / "crest.csv")
            lines = path.read_text().splitlines()
        self.assertTrue(lines[0].startswith("# esc_0_limit="))
        self.assertIn("n,esc_0,esc_1", "\n".join(lines))


class IncrementLawTests(SimpleTestCase):
    def setUp(self):
        self.law = k1_law(3, 4, 10)

    def test_normalized_and_symmetric(self):
        self.assertAlmostEqual(float(self.law.masses.sum()), 1.0, places=12)
        self.assertEqual(list(self.law.support), list(range(-8, 9)))
        self.assertLess(self.law.asymmetry(), 1e-9)
        self.assertEqual(self.law.symmetrize().asymmetry(), 0.0)

    def test_zero_is_the_largest_atom(self):
        self.assertEqual(int(self.law.support[np.argmax(self.law.masses)]), 0)
        self.assertEqual(self.law.mass(0), float(self.law.masses.max()))
        self.assertEqual(self.law.mass(99), 0.0)

    def test_truncation_tv(self):
        tv = k1_truncation_tv(10, inner=3, target=4)
        self.assertGreaterEqual(tv, 0.0)
        self.assertLess(tv, 0.1)

    def test_bad_depths(self):
        with self.assertRaises(DomainError):
            k1_law(6, 6, 19)

    def test_csv_rows(self):
        rows = list(self.law.csv_rows())
        self.assertEqual(rows[0][0], -8)
        self.assertEqual(len(rows), 17)


class HistogramTests(SimpleTestCase):
    def test_uniform(self):
        h = dual_harmonic_exact(1)
        np.testing.assert_array_equal(h.masses, [0.5, 0.5])
        u = DyadicHistogram.uniform(10)
        self.assertEqual(u.tv(u), 0.0)
        profile = g_profile(u)
        self.assertTrue((profile.g == 0.5).all())
        self.assertAlmostEqual(profile.entropy, 1.0, places=12)
        self.assertTrue((g_derivative(profile, 21) == 0).all())
        stats = two_bit_statistics(u)
        self.assertEqual(stats.masses, {"00": 0.25, "01": 0.25, "10": 0.25, "11": 0.25})
        self.assertEqual(stats.excess, 0.0)

    def test_coarsening_is_exact(self):
        masses = np.random.default_rng(5).random(64)
        h = DyadicHistogram(6, masses / masses.sum())
        coarse = h.coarsen(5)
        for k in range(32):
            self.assertEqual(coarse.masses[k], h.masses[2 * k] + h.masses[2 * k + 1])
        self.assertAlmostEqual(h.mass("01"), float(h.masses[16:32].sum()), places=15)
        with self.assertRaises(ResolutionError):
            h.coarsen(7)

    def test_doubling_and_mirror(self):
        u = DyadicHistogram.uniform(6)
        np.testing.assert_allclose(u.doubling_pushforward().masses, u.coarsen(5).masses)
        h = DyadicHistogram(2, [0.1, 0.2, 0.3, 0.4])
        np.testing.assert_array_equal(h.mirrored().masses, [0.4, 0.3, 0.2, 0.1])
        np.testing.assert_allclose(h.doubling_pushforward().masses, [0.4, 0.6])

    def test_csv_columns(self):
        self.assertEqual(DyadicHistogram.bit_changes(0b0101, 4), 3)
        self.assertEqual(DyadicHistogram.bit_changes(0b0011, 4), 1)
        self.assertEqual(DyadicHistogram.bit_changes(0, 4), 0)
        row = list(DyadicHistogram.uniform(4).csv_rows())[3]
        self.assertEqual(row[:2], (3, "3/2^4"))
        self.assertEqual(row[3], 1.0)

    def test_harmonic_histogram(self):
        law = k1_law(3, 4, 10)
        h = harmonic_histogram(law, terms=14, resolution=8)
        self.assertEqual(h.resolution, 8)
        self.assertAlmostEqual(h.total, 1.0, places=12)
        self.assertAlmostEqual(h.mass("0"), 0.5, delta=5e-3)
        self.assertLess(float(np.abs(h.masses - h.mirrored().masses).max()), 5e-3)
        self.assertLess(h.doubling_pushforward().l1(h.coarsen(7)), 2e-2)
        self.assertGreater(h.error, 0)
        with self.assertRaises(ResolutionError):
            harmonic_histogram(law, terms=10, resolution=8)

    def test_two_bit_identity(self):
        h = DyadicHistogram(2, [0.3, 0.2, 0.2, 0.3])
        stats = two_bit_statistics(h)
        self.assertAlmostEqual(stats.excess, 0.1)
        report = singularity_report(h, [2])
        self.assertAlmostEqual(report.rows[0][2], 2 * abs(stats.excess))

    def test_singularity_report(self):
        report = singularity_report(DyadicHistogram.uniform(14))
        self.assertEqual(sorted(report.tv), list(range(6, 15)))
        self.assertTrue(all(tv == 0 for tv in report.tv.values()))
        self.assertFalse(report.increasing)

    def test_g_profile_flags_empty_pairs(self):
        masses = np.full(256, 1 / 254)
        masses[0] = masses[128] = 0.0
        profile = g_profile(DyadicHistogram(8, masses))
        self.assertEqual(profile.flagged, [0, 128])
        self.assertTrue(np.isnan(profile.g[0]))
        np.testing.assert_allclose(profile.g[1:128] + profile.g[129:], 1.0)
        with self.assertRaises(ResolutionError):
            g_profile(DyadicHistogram.uniform(4))

    def test_substring_density(self):
        alternating = Word(int("01" * 20_000, 2), 40_000)
        self.assertAlmostEqual(substring_density(alternating, "01").value, 20_000 / 39_999)
        self.assertEqual(substring_density(alternating, "00").value, 0.0)
        self.assertEqual(substring_density(alternating, "").value, 1.0)
        bits = np.tile([1, 1, 0, 1], 10_000)
        self.assertAlmostEqual(substring_density(bits, "11").value, 19_999 / 39_999)

    def test_substring_density_needs_enough_bits(self):
        with self.assertRaises(DomainError):
            substring_density(np.ones(19_999, dtype=np.uint8), "1")
        with self.assertRaises(DomainError):
            substring_density(Word(0, 9_999), "")
        self.assertEqual(substring_density(np.ones(20_000, dtype=np.uint8), "1").value, 1.0)


class ChainTests(SimpleTestCase):
    def test_matches_dense_oracle(self):
        for length in (2, 3, 4):
            for leading_bit in ("zero", "random"):
                chain = truncated_stationary(length, tol=1e-14, leading_bit=leading_bit)
                np.testing.assert_allclose(chain.vector, dense_stationary(length, leading_bit), atol=1e-10)

    def test_stationarity(self):
        chain = truncated_stationary(8)
        self.assertAlmostEqual(float(chain.vector.sum()), 1.0, places=12)
        residual = np.abs(chain_step(chain.vector, 8) - chain.vector).sum()
        self.assertLess(residual, 1e-12)
        np.testing.assert_allclose(chain.marginal(8), chain.vector)

    def test_twelve_bit_chain_p3(self):
        self.assertAlmostEqual(truncated_stationary(12).p3, 0.382332, delta=5e-6)

    def test_trend_and_histogram(self):
        rows = stationary_trend(range(4, 7))
        self.assertEqual([r.length for r in rows], [4, 5, 6])
        self.assertTrue(all(r.marginal_gap >= 0 for r in rows))
        h = stationary_histogram(truncated_stationary(8), 6)
        self.assertAlmostEqual(h.total, 1.0, places=12)

    def test_bad_parameters(self):
        with self.assertRaises(DomainError):
            truncated_stationary(1)
        with self.assertRaises(DomainError):
            truncated_stationary(4, leading_bit="one")

    def test_dual_invariance(self):
        self.assertLessEqual(dual_stationary_invariance_check(1), 1e-15)
        self.assertLessEqual(dual_stationary_invariance_check(8), 1e-14)
        point = np.zeros(256)
        point[5] = 1.0
        self.assertGreater(dual_stationary_invariance_check(8, point), 0.5)
