import math

import numpy as np
from django.test import SimpleTestCase

from lowerbound.exceptions import ProblemInputError
from lowerbound.measure import (
    LearningProblem, ProbabilitySpace, as_function, dump_problem, excess_loss, excess_loss_class,
    expected_perturbed_excess, geometry, inner_product, load_problem, minimizer_set, norm,
    perturbed_excess_loss, perturbed_target, risk,
)

from .fixtures import all_problems, simplex, two_point, with_suboptimal

LAMBDAS = (0.01, 0.1, 0.5)


class ProbabilitySpaceTests(SimpleTestCase):
    def test_uniform_weights(self):
        space = ProbabilitySpace.uniform(4)
        self.assertEqual(space.atom_count, 4)
        self.assertEqual(space.cumulative[-1], 1.0)

    def test_rejects_weights_not_summing_to_one(self):
        with self.assertRaises(ProblemInputError):
            ProbabilitySpace([0.5, 0.4])

    def test_rejects_zero_weight(self):
        with self.assertRaises(ProblemInputError):
            ProbabilitySpace([1.0, 0.0])


class FunctionTests(SimpleTestCase):
    def setUp(self):
        self.space = ProbabilitySpace([0.25, 0.75])

    def test_inner_product_and_norm(self):
        self.assertAlmostEqual(inner_product([1.0, 2.0], [2.0, 1.0], self.space), 0.5 + 1.5)
        self.assertAlmostEqual(norm([2.0, 0.0], self.space), 1.0)

    def test_risk(self):
        self.assertAlmostEqual(risk([1.0, 1.0], [0.0, 0.0], self.space), 1.0)

    def test_risk_ignores_atom_order(self):
        weights = np.array([0.2, 0.3, 0.5])
        f = np.array([0.4, -1.0, 0.7])
        target = np.array([0.0, 0.5, -0.25])
        expected = risk(f, target, ProbabilitySpace(weights))
        for order in ([2, 0, 1], [1, 2, 0], [2, 1, 0]):
            with self.subTest(order=order):
                permuted = risk(f[order], target[order], ProbabilitySpace(weights[order]))
                self.assertAlmostEqual(permuted, expected, places=14)

    def test_dimension_mismatch(self):
        with self.assertRaises(ProblemInputError):
            inner_product([1.0], [1.0, 2.0], self.space)
        with self.assertRaises(ProblemInputError):
            as_function([1.0, 2.0, 3.0], self.space)

    def test_unit_ball(self):
        with self.assertRaises(ProblemInputError):
            as_function([1.5, 0.0], self.space, unit_ball=True)

    def test_functions_are_read_only(self):
        function = as_function([0.1, 0.2], self.space)
        with self.assertRaises(ValueError):
            function[0] = 1.0


class LearningProblemTests(SimpleTestCase):
    def test_oracle_must_minimize_risk(self):
        with self.assertRaises(ProblemInputError):
            LearningProblem(ProbabilitySpace.uniform(2), [[1.0, 1.0], [0.0, 1.0]], [0.0, 0.0], oracle_index=0)

    def test_class_must_lie_in_unit_ball(self):
        with self.assertRaises(ProblemInputError):
            LearningProblem(ProbabilitySpace.uniform(2), [[2.0, 0.0]], [0.0, 0.0])

    def test_minimizer_set(self):
        self.assertEqual(minimizer_set(two_point()), (0, 1))
        self.assertEqual(minimizer_set(with_suboptimal()), (0, 1))

    def test_two_point_geometry(self):
        geo = geometry(two_point())
        self.assertAlmostEqual(geo.rho, 1 / math.sqrt(2))
        self.assertAlmostEqual(geo.big_d, 1 / math.sqrt(2))
        self.assertEqual(geo.rho_inf, 1.0)
        self.assertAlmostEqual(geo.rho_over_d, 1.0)

    def test_degenerate_geometry(self):
        geo = geometry(all_problems()['degenerate'])
        self.assertEqual(geo.big_d, 0.0)
        self.assertEqual(geo.rho_over_d, 1.0)


class ExcessLossTests(SimpleTestCase):
    def test_squared_loss_identity_on_minimizers(self):
        for name, problem in all_problems().items():
            weights = problem.space.weights
            for lam in LAMBDAS:
                for index in minimizer_set(problem):
                    with self.subTest(problem=name, lam=lam, f=index):
                        expected = weights @ perturbed_excess_loss(index, problem, lam)
                        distance = weights @ (problem.function(index) - problem.oracle) ** 2
                        self.assertLessEqual(abs(expected - lam * distance), 1e-12)

    def test_perturbation_is_close_in_sup_norm(self):
        for name, problem in all_problems().items():
            rho_inf = geometry(problem).rho_inf
            for lam in LAMBDAS:
                for index in range(problem.size):
                    with self.subTest(problem=name, lam=lam, f=index):
                        gap = perturbed_excess_loss(index, problem, lam) - excess_loss(index, problem)
                        self.assertLessEqual(np.max(np.abs(gap)), 8 * lam * rho_inf + 1e-15)

    def test_expected_excess_matches_weighted_sum(self):
        for name, problem in all_problems().items():
            for lam in LAMBDAS:
                with self.subTest(problem=name, lam=lam):
                    exact = expected_perturbed_excess(problem, lam)
                    direct = [problem.space.weights @ perturbed_excess_loss(i, problem, lam)
                              for i in range(problem.size)]
                    np.testing.assert_allclose(exact, direct, atol=1e-12)

    def test_oracle_is_the_unique_minimizer_for_the_moved_target(self):
        for name, problem in all_problems().items():
            for lam in (0.1, 0.5, 1.0):
                with self.subTest(problem=name, lam=lam):
                    moved = perturbed_target(problem, lam)
                    risks = np.array([risk(f, moved, problem.space) for f in problem.class_functions])
                    others = np.delete(risks, problem.oracle_index)
                    self.assertEqual(int(np.argmin(risks)), problem.oracle_index)
                    self.assertTrue(np.all(others > risks[problem.oracle_index] + 1e-12))

    def test_oracle_stays_a_minimizer_without_perturbation(self):
        problem = simplex(4)
        risks = [risk(f, perturbed_target(problem, 0.0), problem.space) for f in problem.class_functions]
        self.assertAlmostEqual(min(risks), risks[problem.oracle_index])

    def test_suboptimal_function_keeps_its_risk_gap(self):
        expected = expected_perturbed_excess(with_suboptimal(), 0.1)
        self.assertAlmostEqual(expected[2], 0.9 * 0.5 + 0.1 * 0.5)

    def test_lambda_out_of_range(self):
        with self.assertRaises(ProblemInputError):
            perturbed_excess_loss(0, two_point(), 1.5)

    def test_excess_loss_class_of_two_point(self):
        loss_set = excess_loss_class(two_point())
        self.assertEqual(loss_set.indices, (0, 1))
        np.testing.assert_array_equal(loss_set.elements[0], [0.0, 0.0])
        np.testing.assert_allclose(loss_set.elements[1], [-1.0, 1.0])
        np.testing.assert_allclose(loss_set.gram, [[0.0, 0.0], [0.0, 1.0]])
        self.assertAlmostEqual(loss_set.sigma_max, 1.0)

    def test_subset_outside_minimizer_set(self):
        with self.assertRaises(ProblemInputError):
            excess_loss_class(with_suboptimal(), subset_indices=[2])


class SerializationTests(SimpleTestCase):
    def test_dump_and_load(self):
        problem = all_problems()['sphere']
        loaded = load_problem(dump_problem(problem))
        np.testing.assert_array_equal(loaded.class_functions, problem.class_functions)
        np.testing.assert_array_equal(loaded.space.weights, problem.space.weights)
        self.assertEqual(loaded.oracle_index, problem.oracle_index)

    def test_missing_key(self):
        with self.assertRaises(ProblemInputError):
            load_problem('atoms = 2\nweights = 0.5, 0.5\nf.0 = 0, 0\n')

    def test_function_numbering(self):
        text = 'atoms = 2\nweights = 0.5, 0.5\ntarget = 0, 0\nf.1 = 1, 0\noracle_index = 0\n'
        with self.assertRaises(ProblemInputError):
            load_problem(text)

    def test_atom_count_mismatch(self):
        text = 'atoms = 3\nweights = 0.5, 0.5\ntarget = 0, 0\nf.0 = 1, 0\noracle_index = 0\n'
        with self.assertRaises(ProblemInputError):
            load_problem(text)
