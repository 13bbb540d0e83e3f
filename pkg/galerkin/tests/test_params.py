import math

from django.test import SimpleTestCase

from galerkin.exceptions import InvalidParameterError
from galerkin.params import (
    beta_max,
    coercivity_constants,
    default_gamma,
    kappa_threshold,
    path_condition,
    select_beta,
    transform,
    validate,
)

from .helpers import BENCHMARK, REFERENCE


class TransformTest(SimpleTestCase):
    """Test the reduction to transformed parameters"""

    def test_transform_without_risk_premium(self):
        """Test lambda = 0 keeps kappa and theta"""
        t = transform(REFERENCE)
        self.assertEqual(t.kappa_star, 3.5)
        self.assertEqual(t.theta_star, 0.6)
        self.assertEqual(t.q_r, 0.0)
        self.assertAlmostEqual(t.theta_sigma, 0.6)

    def test_transform_is_identity_without_risk_premium(self):
        """Test lambda = 0 leaves kappa and theta unchanged for several sets"""
        for m in (REFERENCE, BENCHMARK, BENCHMARK.with_overrides(r=0.05, q=0.02), REFERENCE.with_overrides(kappa=7.0)):
            with self.subTest(kappa=m.kappa, theta=m.theta):
                t = transform(m)
                self.assertEqual(t.kappa_star, m.kappa)
                self.assertEqual(t.theta_star, m.theta)

    def test_transform_absorbs_lambda(self):
        """Test kappa* = kappa + lambda and kappa* theta* = kappa theta"""
        t = transform(REFERENCE.with_overrides(kappa=2.0, lambda_=1.5, r=0.03, q=0.01))
        self.assertAlmostEqual(t.kappa_star, 3.5)
        self.assertAlmostEqual(t.kappa_star * t.theta_star, 2.0 * 0.6)
        self.assertAlmostEqual(t.q_r, -0.02)

    def test_invariants_are_named(self):
        """Test each violated invariant is reported by name"""
        cases = {
            'sigma > 0': {'sigma': 0.0},
            'kappa > 0': {'kappa': -1.0},
            '|rho| < 1': {'rho': 1.0},
            'lambda >= 0': {'lambda_': -0.1},
            'T > 0': {'T': 0.0},
        }
        for invariant, changes in cases.items():
            with self.assertRaises(InvalidParameterError) as ctx:
                transform(REFERENCE.with_overrides(**changes))
            self.assertEqual(ctx.exception.invariant, invariant)


class AdmissibilityTest(SimpleTestCase):
    """Test the admissibility calculus on the reference set"""

    def setUp(self):
        self.t = transform(REFERENCE)
        self.report = validate(self.t, 2.0)

    def test_reference_values(self):
        """Test Feller slack, kappa threshold, mu and beta_max"""
        self.assertTrue(self.report.admissible)
        self.assertAlmostEqual(self.report.check('FELLER_CONDITION')['slack'], -1.6, places=12)
        self.assertAlmostEqual(self.report.kappa_threshold, 1.0 + math.sqrt(6.0), places=12)
        self.assertAlmostEqual(self.report.kappa_threshold, 3.4495, places=4)
        self.assertAlmostEqual(self.report.weight.mu, 2.5, places=12)
        self.assertAlmostEqual(self.report.beta_max, 4.2, places=12)
        self.assertEqual(self.report.weight.beta, 2.0)

    def test_reference_constants(self):
        """Test the explicit coercivity constants"""
        c = self.report.constants
        self.assertAlmostEqual(c.c1_prime, 0.125, places=12)
        self.assertAlmostEqual(c.c1, 0.125, places=12)
        self.assertAlmostEqual(c.c3, 1.1, places=12)
        self.assertAlmostEqual(c.c2, -9.25, places=12)
        self.assertAlmostEqual(c.c2_prime, 9.75, places=12)
        self.assertAlmostEqual(c.M1, 6.5, places=12)

    def test_c1_prime_vanishes_at_threshold(self):
        """Test c1' is close to zero just above the kappa threshold"""
        report = validate(transform(REFERENCE.with_overrides(kappa=3.4495)), 2.0)
        self.assertTrue(report.admissible)
        self.assertGreaterEqual(report.constants.c1_prime, 0.0)
        self.assertLess(abs(report.constants.c1_prime), 1e-3)

    def test_admissibility_is_monotone_in_kappa(self):
        """Test raising kappa* keeps an admissible set admissible and c1' growing"""
        previous = None
        for kappa in (3.5, 4.0, 5.0, 7.0, 10.0):
            with self.subTest(kappa=kappa):
                report = validate(transform(REFERENCE.with_overrides(kappa=kappa)), 2.0)
                self.assertTrue(report.admissible)
                if previous is not None:
                    self.assertGreater(report.constants.c1_prime, previous)
                previous = report.constants.c1_prime

    def test_constants_match_direct_call(self):
        """Test the report carries coercivity_constants of its weight"""
        self.assertEqual(coercivity_constants(self.t, self.report.weight), self.report.constants)

    def test_helpers(self):
        """Test threshold, beta_max and beta selection helpers"""
        self.assertAlmostEqual(kappa_threshold(self.t, 2.0), self.report.kappa_threshold)
        self.assertAlmostEqual(beta_max(self.t), 4.2)
        self.assertEqual(select_beta(self.t), 2.0)

    def test_feller_failure(self):
        """Test a Feller violation is reported, not raised"""
        report = validate(transform(REFERENCE.with_overrides(kappa=0.5)), 2.0)
        self.assertFalse(report.admissible)
        rules = [v['rule'] for v in report.violations]
        self.assertIn('FELLER_CONDITION', rules)
        self.assertGreater(report.check('FELLER_CONDITION')['slack'], 0)

    def test_kappa_bound_failure(self):
        """Test a large gamma breaks the kappa inequality"""
        report = validate(self.t, 4.0)
        self.assertFalse(report.check('KAPPA_BOUND')['passed'])
        self.assertFalse(report.admissible)

    def test_beta_override(self):
        """Test beta overrides inside and outside (1, beta_max]"""
        self.assertTrue(validate(self.t, 2.0, beta=3.0).check('BETA_RANGE')['passed'])
        self.assertFalse(validate(self.t, 2.0, beta=5.0).check('BETA_RANGE')['passed'])
        self.assertFalse(validate(self.t, 2.0, beta=1.0).check('BETA_RANGE')['passed'])

    def test_gamma_must_be_positive(self):
        """Test gamma <= 0 raises"""
        with self.assertRaises(InvalidParameterError):
            validate(self.t, 0.0)

    def test_benchmark_beta_at_upper_end(self):
        """Test beta = beta_max on the benchmark keeps c3 admissible"""
        report = validate(transform(BENCHMARK), default_gamma('put'))
        self.assertTrue(report.admissible)
        self.assertAlmostEqual(report.weight.beta, report.beta_max)
        self.assertAlmostEqual(report.constants.c3, 0.0, places=12)

    def test_default_gamma(self):
        """Test default gamma per payoff kind"""
        self.assertEqual(default_gamma('call'), 2.5)
        self.assertEqual(default_gamma('put'), 0.5)
        self.assertEqual(default_gamma('custom'), 0.5)


class PathConditionTest(SimpleTestCase):
    """Test the smallness condition of the path estimate"""

    def test_path_condition_value(self):
        """Test C~ assembles its three terms"""
        t = transform(REFERENCE)
        w = validate(t, 2.0).weight
        result = path_condition(t, w, kappa0=0.1, nu0=10.0, T_prime=0.25, boundedness_constant=5.0)
        expected = 2.0 * 5.0 / 10.0 + 0.6 + 2.0 * 1.1 * (1.0 + 2.0 * 3.5 * 0.6) * 0.1 * 0.25
        self.assertAlmostEqual(result['cTilde'], expected)
        self.assertAlmostEqual(result['bound'], 0.5)
        self.assertFalse(result['holds'])
        self.assertTrue(result['tanCondition'])
