import math

import numpy as np
from django.test import SimpleTestCase
from scipy import stats

from lowerbound.exceptions import NumericalError, ProblemInputError
from lowerbound.gaussian import (
    build_excess_loss_set, closed_form_H_pair, concentration_probe, estimate_H, factorize_gram, sample_gp,
)

from .fixtures import degenerate, simplex, sphere, two_point

# E max of d standard normals
EXPECTED_MAX_OF_NORMALS = {4: 1.0293753730, 16: 1.7659913931}


class FactorizationTests(SimpleTestCase):
    def test_rejects_indefinite_matrix(self):
        with self.assertRaises(NumericalError) as caught:
            factorize_gram([[1.0, 2.0], [2.0, 1.0]])
        self.assertAlmostEqual(caught.exception.eigenvalues[0], -1.0)

    def test_rank_deficient_gram(self):
        loss_set = build_excess_loss_set(simplex(4))
        factor = factorize_gram(loss_set.gram)
        self.assertEqual(factor.active.tolist(), [1, 2, 3])
        self.assertLessEqual(factor.jitter, 1e-6)

    def test_zero_gram(self):
        factor = factorize_gram(np.zeros((1, 1)))
        self.assertEqual(factor.active.size, 0)


class SamplingTests(SimpleTestCase):
    def test_single_zero_element_draws_zero(self):
        draws = sample_gp(build_excess_loss_set(degenerate()), 100, seed=1)
        self.assertEqual(draws.shape, (100, 1))
        self.assertFalse(np.any(draws))

    def test_reproducible_across_workers(self):
        loss_set = build_excess_loss_set(sphere())
        one = sample_gp(loss_set, 10000, seed=5, workers=1)
        four = sample_gp(loss_set, 10000, seed=5, workers=4)
        np.testing.assert_array_equal(one, four)

    def test_covariance(self):
        loss_set = build_excess_loss_set(two_point())
        draws = sample_gp(loss_set, 20000, seed=2)
        self.assertAlmostEqual(np.var(draws[:, 1]), 1.0, delta=0.05)

    def test_simplex_off_diagonal_covariance(self):
        draws = sample_gp(build_excess_loss_set(simplex(4)), 100000, seed=12)
        covariance = np.cov(draws[:, 1:], rowvar=False)
        # Var of a product of two N(0, 1/2) coordinates with covariance 1/4
        stderr = math.sqrt((0.5 * 0.5 + 0.25 ** 2) / draws.shape[0])
        for i, j in ((0, 1), (0, 2), (1, 2)):
            with self.subTest(pair=(i, j)):
                self.assertLessEqual(abs(covariance[i, j] - 0.25), 4 * stderr)
        np.testing.assert_allclose(np.diag(covariance), 0.5, atol=0.01)

    def test_count_must_be_positive(self):
        with self.assertRaises(ProblemInputError):
            sample_gp(build_excess_loss_set(two_point()), 0, seed=1)


class SupremumTests(SimpleTestCase):
    def test_two_point_matches_closed_form(self):
        estimate = estimate_H(build_excess_loss_set(two_point()), 100000, seed=3)
        self.assertLessEqual(abs(estimate.mean - 1 / math.sqrt(2 * math.pi)), 3 * estimate.stderr)

    def test_simplex_matches_max_of_normals(self):
        for d, expected_max in EXPECTED_MAX_OF_NORMALS.items():
            with self.subTest(d=d):
                estimate = estimate_H(build_excess_loss_set(simplex(d)), 100000, seed=4)
                self.assertLessEqual(abs(estimate.mean - expected_max / math.sqrt(d)), 3 * estimate.stderr)

    def test_scaling_the_set_scales_the_estimate(self):
        for name, problem in {'simplex4': simplex(4), 'simplex16': simplex(16)}.items():
            with self.subTest(problem=name):
                loss_set = build_excess_loss_set(problem)
                base = estimate_H(loss_set, 20000, seed=8)
                scaled = estimate_H(loss_set.scaled(2.5), 20000, seed=8)
                self.assertAlmostEqual(scaled.mean / base.mean, 2.5, delta=2.5e-9)
                self.assertAlmostEqual(scaled.sigma_max, 2.5 * base.sigma_max)

    def test_monotone_under_inclusion(self):
        problem = simplex(16)
        estimates = [
            estimate_H(build_excess_loss_set(problem, subset_indices=range(size)), 50000, seed=9)
            for size in (1, 2, 3, 8, 16)
        ]
        self.assertEqual(estimates[0].mean, 0.0)
        for smaller, larger in zip(estimates, estimates[1:]):
            self.assertGreaterEqual(larger.mean, smaller.mean - 3 * math.hypot(smaller.stderr, larger.stderr))

    def test_degenerate_set_has_zero_supremum(self):
        estimate = estimate_H(build_excess_loss_set(degenerate()), 100, seed=1)
        self.assertEqual(estimate.mean, 0.0)
        self.assertEqual(estimate.stderr, 0.0)

    def test_closed_form_pair(self):
        self.assertAlmostEqual(closed_form_H_pair(1.0), 0.3989422804, places=9)
        self.assertEqual(closed_form_H_pair(0.0), 0.0)


class ConcentrationTests(SimpleTestCase):
    def test_probability_floor(self):
        for name, problem in {'two_point': two_point(), 'simplex4': simplex(4), 'simplex16': simplex(16),
                              'sphere': sphere()}.items():
            with self.subTest(problem=name):
                probe = concentration_probe(build_excess_loss_set(problem), 100000, seed=6)
                self.assertGreaterEqual(probe.probability, 0.05)
                self.assertGreater(probe.sigma_ratio, 0.0)

    def test_two_point_probability(self):
        probe = concentration_probe(build_excess_loss_set(two_point()), 100000, seed=10)
        expected = stats.norm.sf(1 / (4 * math.sqrt(2 * math.pi)))
        self.assertAlmostEqual(expected, 0.4603, places=3)
        self.assertAlmostEqual(probe.probability, expected, delta=0.01)

    def test_sigma_ratio_is_stable_across_seeds(self):
        for name, problem in {'two_point': two_point(), 'simplex4': simplex(4), 'sphere': sphere()}.items():
            with self.subTest(problem=name):
                loss_set = build_excess_loss_set(problem)
                ratios = [concentration_probe(loss_set, 100000, seed=seed).sigma_ratio for seed in (1, 2, 3)]
                self.assertTrue(all(math.isfinite(ratio) for ratio in ratios))
                self.assertLessEqual(max(ratios) / min(ratios), 1.05)

    def test_zero_set_gives_one_half(self):
        probe = concentration_probe(build_excess_loss_set(degenerate()), 100, seed=1)
        self.assertEqual(probe.probability, 0.5)
