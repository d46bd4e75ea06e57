import itertools

import numpy as np
from django.test import SimpleTestCase

from apps.core.algebra import implied_moments, total_effects
from apps.core.exceptions import NumericalError
from apps.core.structures import Evidence
from apps.core.tests import fixtures
from apps.counterfactual.services import feedback_matrix, predict
from apps.evidence.services import condition, condition_none
from apps.planning.services import (
    check_w_decorrelation,
    compute_sigma_star,
    d_blocks,
    gain_radius_profile,
    minimality_check,
    optimal_plan_moments,
    regression_coefs,
    solve_optimal_b,
    solve_target_x,
    variance_for_gain,
)


def prior(sem):
    return condition_none(implied_moments(sem))


class ChainPlanTests(SimpleTestCase):

    def setUp(self):
        self.sem, self.part = fixtures.chain()
        self.cm = prior(self.sem)
        self.result = optimal_plan_moments(self.sem, self.part, self.cm, None, [1.0])

    def test_gain_cancels_backdoor(self):
        np.testing.assert_allclose(self.result.b_star, [[-0.5]], atol=1e-12)
        self.assertLess(self.result.residual, 1e-12)

    def test_building_blocks(self):
        te = total_effects(self.sem, self.part)
        rc = regression_coefs(self.cm, self.part)
        np.testing.assert_allclose(solve_optimal_b(te, rc, np.zeros((1, 0))), [[-0.5]], atol=1e-12)
        np.testing.assert_allclose(compute_sigma_star(te, rc, self.cm, self.part, np.zeros((1, 1))), [[1.0]], atol=1e-12)

    def test_moments_of_response(self):
        self.assertAlmostEqual(self.result.mean_y, 2.0, places=12)
        self.assertAlmostEqual(self.result.var_y, 1.0, places=12)
        np.testing.assert_allclose(self.result.sigma_star, [[1.0]], atol=1e-12)

    def test_plan_noise_raises_variance(self):
        noisy = optimal_plan_moments(self.sem, self.part, self.cm, None, [1.0], noise_cov=[[0.5]])
        self.assertAlmostEqual(noisy.var_y, 3.0, places=12)

    def test_target(self):
        x = solve_target_x(self.result, 4.0)
        np.testing.assert_allclose(x, [2.0], atol=1e-12)
        at_target = optimal_plan_moments(self.sem, self.part, self.cm, None, x)
        self.assertAlmostEqual(at_target.mean_y, 4.0, places=12)
        self.assertAlmostEqual(at_target.var_y, 1.0, places=12)

    def test_decorrelation(self):
        te = total_effects(self.sem, self.part)
        rc = regression_coefs(self.cm, self.part)
        np.testing.assert_allclose(check_w_decorrelation(self.sem, self.part, self.result.plan, self.cm, te=te, rc=rc), [0.0], atol=1e-12)
        naive = self.result.plan.with_gain_w(np.zeros((1, 1)))
        # Sem ajuste, sobra o efeito direto W -> Y.
        np.testing.assert_allclose(check_w_decorrelation(self.sem, self.part, naive, self.cm, te=te, rc=rc), [1.0], atol=1e-12)

    def test_decorrelation_computes_its_own_effects(self):
        np.testing.assert_allclose(check_w_decorrelation(self.sem, self.part, self.result.plan, self.cm), [0.0], atol=1e-12)
        naive = self.result.plan.with_gain_w(np.zeros((1, 1)))
        np.testing.assert_allclose(check_w_decorrelation(self.sem, self.part, naive, self.cm), [1.0], atol=1e-12)

    def test_point_evidence_on_w_uses_pseudoinverse(self):
        cm = condition(self.sem, Evidence.point(self.sem, {'W': 1.0}))
        result = optimal_plan_moments(self.sem, self.part, cm, None, [1.0])
        self.assertTrue(any('SingularConditionalCov' in message for message in result.warnings))
        np.testing.assert_allclose(result.b_star, [[0.0]], atol=1e-12)
        self.assertAlmostEqual(result.mean_y, 3.0, places=12)

    def test_metadata(self):
        metadata = self.result.metadata()
        self.assertFalse(metadata['min_norm_solution'])
        self.assertFalse(metadata['degenerate_m'])
        self.assertAlmostEqual(metadata['plan']['b'][0][0], -0.5, places=12)
        self.assertLess(metadata['eq_residual'], 1e-12)


class GeneralGainTests(SimpleTestCase):

    def test_response_outside_f_beats_grid_search(self):
        sem, part = fixtures.build(fixtures.mediated_spec(), ['X'], ['F'], ['W', 'Z'], 'Y')
        cm = prior(sem)
        result = optimal_plan_moments(sem, part, cm, [[0.3]], [0.0])
        best = min(
            variance_for_gain(sem, part, cm, result.plan.with_gain_w(result.b_star + np.array([[du, dv]])))
            for du, dv in itertools.product(np.linspace(-1.0, 1.0, 21), repeat=2)
        )
        self.assertLessEqual(result.var_y, best + 1e-10)
        self.assertLess(result.residual, 1e-10)

    def test_response_inside_f(self):
        sem, part = fixtures.build(fixtures.mediated_spec(), ['X'], ['Y'], ['W', 'Z'], 'Y')
        cm = prior(sem)
        result = optimal_plan_moments(sem, part, cm, [[-0.4]], [1.0])
        te = total_effects(sem, part)
        rc = regression_coefs(cm, part)
        np.testing.assert_allclose(check_w_decorrelation(sem, part, result.plan, cm, te=te, rc=rc), [0.0, 0.0], atol=1e-10)
        self.assertTrue(minimality_check(sem, part, cm, result, n_candidates=40, seed=5).passed)

    def test_d_blocks_reassemble_feedback_inverse(self):
        sem, part = fixtures.build(fixtures.two_treatment_spec(), ['X1', 'X2'], ['F'], ['W'], 'Y')
        te = total_effects(sem, part)
        gain_f = np.array([[0.3], [-0.2]])
        c_xs = np.hstack([gain_f, np.zeros((2, part.n_u))])
        d1, d2 = d_blocks(te, gain_f)
        assembled = np.block([[d1, np.zeros((part.n_f, part.n_u))], [d2, np.eye(part.n_u)]])
        np.testing.assert_allclose(assembled, np.linalg.inv(feedback_matrix(te, c_xs)), atol=1e-12)

    def test_two_treatments_use_min_norm(self):
        sem, part = fixtures.build(fixtures.two_treatment_spec(), ['X1', 'X2'], ['F'], ['W'], 'Y')
        cm = prior(sem)
        result = optimal_plan_moments(sem, part, cm, [[0.3], [-0.2]], [0.0, 0.0])
        self.assertTrue(result.min_norm)
        self.assertLess(result.residual, 1e-10)
        self.assertTrue(minimality_check(sem, part, cm, result, n_candidates=40, seed=2).passed)

    def test_inert_treatment_gets_no_adjustment(self):
        sem, part = fixtures.build(fixtures.inert_treatment_spec(), ['X1', 'X2'], [], ['W'], 'Y')
        result = optimal_plan_moments(sem, part, prior(sem), None, [0.0, 0.0])
        np.testing.assert_allclose(result.m_row, [[1.5, 0.0]], atol=1e-12)
        self.assertAlmostEqual(float(result.b_star[1, 0]), 0.0, places=12)
        x = solve_target_x(result, 3.0)
        np.testing.assert_allclose(x, [2.0, 0.0], atol=1e-12)

    def test_target_from_base_point(self):
        sem, part = fixtures.build(fixtures.inert_treatment_spec(), ['X1', 'X2'], [], ['W'], 'Y')
        result = optimal_plan_moments(sem, part, prior(sem), None, [0.0, 0.0])
        x = solve_target_x(result, 3.0, base_x=[1.0, 5.0])
        np.testing.assert_allclose(x, [2.0, 5.0], atol=1e-12)

    def test_minimality_on_fleet(self):
        for name, spec, x, f, w, y in fixtures.fleet():
            sem, part = fixtures.build(spec, x, f, w, y)
            if not part.n_w:
                continue
            cm = prior(sem)
            with self.subTest(model=name):
                result = optimal_plan_moments(sem, part, cm, np.full((part.n_x, part.n_f), 0.2), np.ones(part.n_x))
                report = minimality_check(sem, part, cm, result, n_candidates=30, seed=1)
                self.assertTrue(report.passed)
                self.assertAlmostEqual(report.var_star, result.var_y, places=9)

    def test_minimality_is_independent_of_workers(self):
        sem, part = fixtures.chain()
        cm = prior(sem)
        result = optimal_plan_moments(sem, part, cm, None, [1.0])
        serial = minimality_check(sem, part, cm, result, n_candidates=20, seed=9, workers=1)
        threaded = minimality_check(sem, part, cm, result, n_candidates=20, seed=9, workers=3)
        self.assertEqual(serial.best_candidate_var, threaded.best_candidate_var)

    def test_matches_general_prediction(self):
        sem, part = fixtures.build(fixtures.mediated_spec(), ['X'], ['F'], ['W'], 'Y')
        cm = condition(sem, Evidence.point(sem, {'Z': 1.0, 'F': 0.5}))
        result = optimal_plan_moments(sem, part, cm, [[0.25]], [2.0], noise_cov=[[0.3]])
        reference = predict(sem, part, result.plan, cm)
        self.assertAlmostEqual(result.mean_y, reference.mean_of('Y'), places=9)
        self.assertAlmostEqual(result.var_y, reference.var_of('Y'), places=9)


class FailureModeTests(SimpleTestCase):

    def test_inadmissible_gain(self):
        sem, part = fixtures.build(fixtures.chain_spec(), ['X'], ['Y'], [], 'Y')
        with self.assertRaises(NumericalError) as ctx:
            optimal_plan_moments(sem, part, prior(sem), [[0.6]], [1.0])
        self.assertEqual(ctx.exception.code, 'InadmissibleGain')

    def test_radius_profile(self):
        sem, part = fixtures.build(fixtures.chain_spec(), ['X'], ['Y'], [], 'Y')
        profile = gain_radius_profile(total_effects(sem, part), np.array([[0.25]]), [1.0, 2.0])
        self.assertEqual(profile, [(1.0, 0.5), (2.0, 1.0)])

    def test_degenerate_response(self):
        sem, part = fixtures.build(fixtures.cancelling_spec(), ['X'], ['F'], ['W'], 'Y')
        cm = prior(sem)
        rc = regression_coefs(cm, part)
        result = optimal_plan_moments(sem, part, cm, None, [1.0])
        self.assertTrue(result.degenerate)
        np.testing.assert_allclose(result.b_star, rc.b_xw, atol=1e-12)
        self.assertTrue(any('DegenerateM' in message for message in result.warnings))
        np.testing.assert_allclose(solve_target_x(result, result.mean_y), [0.0])
        with self.assertRaises(NumericalError) as ctx:
            solve_target_x(result, result.mean_y + 1.0)
        self.assertEqual(ctx.exception.code, 'UnreachableTarget')
