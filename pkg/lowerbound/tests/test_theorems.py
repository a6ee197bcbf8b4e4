import math

import numpy as np
from django.test import SimpleTestCase

from lowerbound.exceptions import ProblemInputError
from lowerbound.gaussian import SupremumEstimate
from lowerbound.measure import Geometry
from lowerbound.theorems import (
    Constants, binomial_oracle_two_point, calibrate_delta, choose_lambda_n, choose_r_n, complexity,
    erm_failure_oracle_two_point, h_scaling_experiment, run_trials, theorem1_experiment, theorem2_check,
    theorem3_experiment, theorem4_experiment,
)

from .fixtures import degenerate, simplex, sphere, two_point, with_suboptimal

H_TWO_POINT = 1 / math.sqrt(2 * math.pi)
DEFAULT_GRID = (1.5, 1.2, 0.9, 0.6, 0.3)


class ParameterTests(SimpleTestCase):
    def setUp(self):
        self.constants = Constants()

    def test_lambda_n(self):
        self.assertEqual(choose_lambda_n(0.0, 100, self.constants), 0.0)
        self.assertAlmostEqual(choose_lambda_n(0.3989, 100, self.constants), 0.019945)
        self.assertEqual(choose_lambda_n(100.0, 1, self.constants), 0.5)

    def test_r_n(self):
        geo = Geometry(big_d=1 / math.sqrt(2), rho=1 / math.sqrt(2), rho_inf=1.0)
        self.assertAlmostEqual(choose_r_n(0.3989, 100, 0.9, geo, self.constants), 0.5 * 0.3989 * 0.81 * 0.5 / 10)
        self.assertEqual(choose_r_n(0.3989, 100, 0.0, geo, self.constants), 0.0)

    def test_constants_must_be_positive(self):
        with self.assertRaises(ProblemInputError):
            Constants(c2=0.0)

    def test_complexity_is_exact_for_pairs(self):
        estimate = complexity(two_point(), 1000, seed=1)
        self.assertAlmostEqual(estimate.mean, H_TWO_POINT)
        self.assertEqual(estimate.stderr, 0.0)


class CalibrationTests(SimpleTestCase):
    def test_two_point_qualifies_below_separation(self):
        calibration = calibrate_delta(two_point(), 64, H_TWO_POINT, Constants(), DEFAULT_GRID, 2000, seed=1)
        self.assertEqual(calibration.delta, 0.9)
        self.assertTrue(calibration.qualified)
        self.assertEqual(calibration.oscillation.mean, 0.0)

    def test_flagged_when_nothing_qualifies(self):
        with self.assertLogs('lowerbound.theorems', 'WARNING'):
            calibration = calibrate_delta(two_point(), 64, H_TWO_POINT, Constants(eta=0.01), (1.5,), 2000, seed=1)
        self.assertEqual(calibration.delta, 1.5)
        self.assertFalse(calibration.qualified)

    def test_degenerate_problem_qualifies_everywhere(self):
        calibration = calibrate_delta(degenerate(), 64, 0.0, Constants(), DEFAULT_GRID, 200, seed=1)
        self.assertEqual(calibration.delta, 1.5)
        self.assertTrue(calibration.qualified)

    def test_grid_must_decrease(self):
        with self.assertRaises(ProblemInputError):
            calibrate_delta(two_point(), 64, H_TWO_POINT, Constants(), (0.3, 0.9), 200, seed=1)


class Theorem2Tests(SimpleTestCase):
    def test_two_point_ratio_is_one(self):
        report = theorem2_check(two_point(), (0.01, 0.1, 0.5))
        self.assertAlmostEqual(report.c_emp, 1.0)
        self.assertTrue(report.minimizer_ratios_exact)
        self.assertTrue(report.passed)

    def test_simplex_ratio_is_one(self):
        report = theorem2_check(simplex(4), (0.01, 0.1, 0.5))
        for row in report.rows:
            self.assertAlmostEqual(row.minimizer_ratio, 1.0)

    def test_suboptimal_function_has_larger_ratio(self):
        report = theorem2_check(with_suboptimal(), (0.01,))
        self.assertAlmostEqual(report.d_over_rho, math.sqrt(2))
        self.assertAlmostEqual(report.rows[0].minimizer_ratio, math.sqrt(2))
        self.assertAlmostEqual(report.c_emp, math.sqrt(2))
        self.assertTrue(report.passed)

    def test_degenerate_problem(self):
        report = theorem2_check(degenerate(), (0.1,))
        self.assertEqual(report.c_emp, math.inf)
        self.assertTrue(report.passed)

    def test_grid_range(self):
        with self.assertRaises(ProblemInputError):
            theorem2_check(two_point(), (0.6,))


class Theorem3Tests(SimpleTestCase):
    def test_two_point_matches_binomial_oracle(self):
        result = theorem3_experiment(two_point(), 1024, 4000, Constants(), seed=5)
        exact = binomial_oracle_two_point(1.0, 0.0, 1024, result.lambda_n, result.threshold, inclusive=True)
        self.assertLessEqual(abs(result.event.probability - exact), 2 * result.event.half_width)

    def test_degenerate_problem_always_reaches_zero(self):
        result = theorem3_experiment(degenerate(), 64, 200, Constants(), seed=1, h_trials=100)
        self.assertEqual(result.event.probability, 1.0)

    def test_simplex_probability_floor(self):
        result = theorem3_experiment(simplex(4), 4096, 1000, Constants(), seed=2, h_trials=20000)
        self.assertGreaterEqual(result.event.probability, 0.1)

    def test_given_complexity_is_used_as_is(self):
        zero = SupremumEstimate(mean=0.0, stderr=0.0, trials=0, sigma_max=0.0)
        result = theorem3_experiment(two_point(), 64, 200, Constants(), seed=1, H=zero)
        self.assertIs(result.H, zero)
        self.assertEqual(result.lambda_n, 0.0)
        self.assertEqual(result.threshold, 0.0)

    def test_needs_enough_trials(self):
        with self.assertRaises(ProblemInputError):
            theorem3_experiment(two_point(), 64, 50, Constants(), seed=1)


class Theorem4Tests(SimpleTestCase):
    def test_two_point_ball_is_the_oracle(self):
        for n in (256, 1024):
            with self.subTest(n=n):
                result = theorem4_experiment(two_point(), n, 0.9, 1000, Constants(), seed=3)
                self.assertEqual(result.ball_size, 1)
                self.assertEqual(result.event.probability, 1.0)

    def test_degenerate_problem(self):
        result = theorem4_experiment(degenerate(), 64, 0.9, 200, Constants(), seed=1, h_trials=100)
        self.assertEqual(result.event.probability, 1.0)

    def test_simplex_probability_floor(self):
        result = theorem4_experiment(simplex(4), 1024, 0.6, 1000, Constants(), seed=4, h_trials=20000)
        self.assertGreaterEqual(result.event.probability, 0.9)


class Theorem1Tests(SimpleTestCase):
    def test_two_point_scaling(self):
        report = theorem1_experiment(
            two_point(), (256, 1024, 4096), 10000, Constants(), DEFAULT_GRID, seed=20240601, p_floor=0.1,
        )
        self.assertTrue(report.passed, report.checks)
        self.assertEqual(report.first_passing_n, 256)
        for row in report.rows:
            with self.subTest(n=row.n):
                self.assertEqual(row.delta, 0.9)
                self.assertLess(row.r_n, row.lambda_n)
                exact = erm_failure_oracle_two_point(1.0, 0.0, row.n, row.lambda_n)
                self.assertLessEqual(abs(row.p_fail.probability - exact), 2 * row.p_fail.half_width)
                self.assertLessEqual(row.p_fail.low, row.p_fail.probability)
                self.assertLessEqual(row.p_fail.probability, row.p_fail.high)

    def test_degenerate_problem_never_fails(self):
        report = theorem1_experiment(degenerate(), (16, 64), 200, Constants(), DEFAULT_GRID, seed=1, h_trials=100,
                                     osc_trials=100)
        for row in report.rows:
            self.assertEqual(row.p_fail.probability, 0.0)
            self.assertEqual(row.mean_excess, 0.0)
        self.assertTrue(report.passed)

    def test_sphere_scaling_is_stable(self):
        report = theorem1_experiment(
            sphere(), (256, 1024, 4096), 4000, Constants(), DEFAULT_GRID, seed=42, h_trials=20000, osc_trials=500,
        )
        values = [row.sqrtn_mean_excess for row in report.rows]
        self.assertGreater(min(values), 0.0)
        self.assertLessEqual(max(values) / min(values), 1.25)

    def test_empty_n_list(self):
        with self.assertRaises(ProblemInputError):
            theorem1_experiment(two_point(), (), 200, Constants(), DEFAULT_GRID, seed=1)


class HScalingTests(SimpleTestCase):
    def test_excess_grows_with_the_minimizer_set(self):
        report = h_scaling_experiment(1.0, (2, 4, 16), (256, 1024), 2000, Constants(), seed=11, h_trials=20000)
        self.assertTrue(report.passed, report.checks)
        multi = [row for row in report.rows if not row.control]
        self.assertEqual(sorted({row.size for row in multi}), [2, 4, 16])
        for row in multi:
            with self.subTest(label=row.label, n=row.n):
                self.assertAlmostEqual(row.rho, 0.25)
                self.assertGreater(row.normalized_excess, 0.1)
        by_size = {row.size: row.H.mean for row in multi}
        self.assertAlmostEqual(by_size[2], 0.125 / math.sqrt(2 * math.pi))
        self.assertLess(by_size[2], by_size[4])
        self.assertLess(by_size[4], by_size[16])

    def test_unique_minimizer_excess_decays_faster(self):
        report = h_scaling_experiment(1.0, (4,), (16, 64, 256), 4000, Constants(), seed=3, h_trials=1000)
        control = [row for row in report.rows if row.control]
        self.assertEqual([row.n for row in control], [16, 64, 256])
        for row in control:
            self.assertEqual(row.size, 1)
            self.assertEqual(row.H.mean, 0.0)
            self.assertEqual(row.lambda_n, 0.0)
            self.assertIsNone(row.normalized_excess)
        values = [row.sqrtn_mean_excess for row in control]
        self.assertGreater(values[0], values[1])
        self.assertLess(values[2], 0.2 * values[0])
        self.assertTrue(report.passed, report.checks)

    def test_control_failure_matches_the_binomial_tail(self):
        report = h_scaling_experiment(1.0, (2,), (16, 64), 4000, Constants(), seed=5, h_trials=1000)
        # ERM leaves f* once k / n > 0.36 / 0.61; at n = 16 that is k >= 10
        exact = sum(math.comb(16, k) for k in range(10, 17)) / 2 ** 16
        first = next(row for row in report.rows if row.control)
        failure = first.failure.failure
        self.assertLessEqual(abs(failure.probability - exact), 2 * failure.half_width)
        self.assertAlmostEqual(first.failure.mean_excess.mean, 0.055 * failure.probability)

    def test_needs_two_sample_sizes(self):
        with self.assertRaises(ProblemInputError):
            h_scaling_experiment(1.0, (2, 4), (256,), 200, Constants(), seed=1)

    def test_d_list_values(self):
        with self.assertRaises(ProblemInputError):
            h_scaling_experiment(1.0, (1, 4), (16, 64), 200, Constants(), seed=1)


class TrialLedgerTests(SimpleTestCase):
    def test_ledgers_share_samples(self):
        first = run_trials(two_point(), 64, H_TWO_POINT, 0.9, 200, Constants(), seed=7)
        second = run_trials(two_point(), 64, H_TWO_POINT, 0.0, 200, Constants(), seed=7)
        np.testing.assert_array_equal(first.counts, second.counts)
        np.testing.assert_array_equal(first.erm_choice, second.erm_choice)

    def test_records(self):
        ledger = run_trials(two_point(), 64, H_TWO_POINT, 0.9, 150, Constants(), seed=7)
        records = list(ledger.records())
        self.assertEqual(len(records), 150)
        self.assertEqual(sum(records[0].counts), 64)
        self.assertEqual(records[3].erm_choice, int(ledger.erm_choice[3]))


class BinomialOracleTests(SimpleTestCase):
    def test_small_n(self):
        self.assertAlmostEqual(erm_failure_oracle_two_point(1.0, 0.0, 4, 0.1), 0.3125)

    def test_half_lambda_never_fails(self):
        self.assertEqual(erm_failure_oracle_two_point(1.0, 0.0, 50, 0.5), 0.0)

    def test_single_observation(self):
        self.assertAlmostEqual(erm_failure_oracle_two_point(1.0, 0.0, 1, 0.2), 0.5)

    def test_large_n_is_finite(self):
        probability = erm_failure_oracle_two_point(1.0, 0.0, 10 ** 6, 0.0002)
        self.assertTrue(0.0 < probability < 0.5)

    def test_n_out_of_range(self):
        with self.assertRaises(ProblemInputError):
            erm_failure_oracle_two_point(1.0, 0.0, 10 ** 6 + 1, 0.1)
