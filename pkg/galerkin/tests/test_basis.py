import math

import numpy as np
from django.test import SimpleTestCase, override_settings
from django.conf import settings

from galerkin.basis import (
    CoefficientVector,
    TensorBasis,
    decay_constant,
    gram_condition,
    gram_factors,
    hermite_derivatives,
    hermite_functions,
    laguerre_derivatives,
    laguerre_functions,
    project,
    suggest_scales,
)
from galerkin.exceptions import DomainError, HestonError, RankDeficiencyError
from galerkin.params import WeightParams
from galerkin.quadspace import GridSpec, WeightedFunction, build_grid, composite_gauss_legendre


def basis_function(basis, m, n):
    """e_mn as a WeightedFunction on ij-meshes"""
    def values(X, XI):
        H = basis.hermite_table(X.ravel())[m].reshape(X.shape)
        L = basis.laguerre_table(XI.ravel())[n].reshape(XI.shape)
        return H * L
    return WeightedFunction(values=values, name=f'e_{m}{n}')


class FamilyTest(SimpleTestCase):
    """Test the one-dimensional Hermite and Laguerre families"""

    def test_lowest_orders(self):
        """Test h_0 and l_0 closed forms"""
        x = np.linspace(-3, 3, 7)
        xi = np.linspace(0.1, 5, 7)
        np.testing.assert_allclose(hermite_functions(0, x)[0], math.pi ** -0.25 * np.exp(-x ** 2 / 2))
        np.testing.assert_allclose(laguerre_functions(0, xi)[0], np.exp(-xi / 2))
        np.testing.assert_allclose(laguerre_functions(1, xi)[1], (1 - xi) * np.exp(-xi / 2))

    def test_derivatives_match_finite_differences(self):
        """Test analytic first derivatives against central differences"""
        h = 1e-6
        x = np.linspace(-2.5, 2.5, 11)
        xi = np.linspace(0.2, 6.0, 11)
        fd_h = (hermite_functions(8, x + h) - hermite_functions(8, x - h)) / (2 * h)
        fd_l = (laguerre_functions(8, xi + h) - laguerre_functions(8, xi - h)) / (2 * h)
        np.testing.assert_allclose(hermite_derivatives(8, x, 1), fd_h, atol=1e-7)
        np.testing.assert_allclose(laguerre_derivatives(8, xi, 1), fd_l, atol=1e-7)

    def test_second_derivatives(self):
        """Test h'' = (x^2 - 2m - 1) h"""
        x = np.linspace(-2, 2, 9)
        table = hermite_functions(6, x)
        expected = (x[None, :] ** 2 - 2 * np.arange(7)[:, None] - 1) * table
        np.testing.assert_allclose(hermite_derivatives(6, x, 2), expected, atol=1e-12)

    def test_plain_orthonormality(self):
        """Test dilated tensor functions stay L2-orthonormal"""
        for basis in (TensorBasis(10, 10), TensorBasis(10, 10, 1.7, 3.0)):
            with self.subTest(x_scale=basis.x_scale, xi_scale=basis.xi_scale):
                half = basis.x_scale * 18.0
                x, wx = composite_gauss_legendre(np.linspace(-half, half, 33), 24)
                xi, wxi = composite_gauss_legendre(np.linspace(0.0, math.sqrt(150.0 / basis.xi_scale), 41) ** 2, 24)
                H = basis.hermite_table(x)
                L = basis.laguerre_table(xi)
                gram = np.kron((H * wx) @ H.T, (L * wxi) @ L.T)
                self.assertLess(np.max(np.abs(gram - np.eye(basis.size))), 1e-10)


class TensorBasisTest(SimpleTestCase):
    """Test indexing and evaluation of the tensor basis"""

    def setUp(self):
        self.basis = TensorBasis(4, 3)

    def test_index_map(self):
        """Test index and orders are inverse"""
        for j in range(self.basis.size):
            self.assertEqual(self.basis.index(*self.basis.orders(j)), j)
        self.assertEqual(self.basis.size, 20)
        self.assertEqual(self.basis.index(1, 2), 6)

    def test_out_of_range(self):
        """Test orders outside the basis raise"""
        with self.assertRaises(HestonError) as ctx:
            self.basis.index(5, 0)
        self.assertEqual(ctx.exception.code, 'order_out_of_range')
        with self.assertRaises(HestonError):
            self.basis.orders(self.basis.size)

    def test_eval_basis_domain(self):
        """Test real evaluation rejects xi <= 0"""
        with self.assertRaises(DomainError):
            self.basis.eval_basis(0, 0, 0.0, 0.0)
        expected = math.pi ** -0.25 * math.exp(-0.5)
        self.assertAlmostEqual(self.basis.eval_basis(0, 0, 0.0, 1.0), expected)

    def test_pointwise_and_mesh_evaluation_agree(self):
        """Test eval_sum on a mesh equals eval_mesh, also at complex points"""
        rng = np.random.default_rng(3)
        c = CoefficientVector(self.basis, rng.standard_normal(20) + 1j * rng.standard_normal(20))
        x = np.array([-1.0, 0.3, 2.0]) + 0.1j
        xi = np.array([0.5, 1.5]) * (1 + 0.2j)
        X, XI = np.meshgrid(x, xi, indexing='ij')
        np.testing.assert_allclose(self.basis.eval_sum(c, X, XI), self.basis.eval_mesh(c, x, xi), atol=1e-12)
        np.testing.assert_allclose(self.basis.eval_sum(c, X, XI, dxi=1),
                                   self.basis.eval_mesh(c, x, xi, dxi=1), atol=1e-12)

    def test_coefficient_vector_checks(self):
        """Test size and finiteness checks"""
        with self.assertRaises(HestonError):
            CoefficientVector(self.basis, np.zeros(3))
        with self.assertRaises(HestonError):
            CoefficientVector(self.basis, np.full(20, np.nan))

    def test_coefficient_rows(self):
        """Test CSV rows carry (index, m, n) and rebuild the vector"""
        c = CoefficientVector.unit(self.basis, 2, 1)
        rows = c.to_rows()
        self.assertEqual(rows[7], {'index': 7, 'm': 2, 'n': 1, 're': 1.0, 'im': 0.0})
        np.testing.assert_array_equal(CoefficientVector.from_rows(self.basis, rows).values, c.values)

    def test_inconsistent_rows_rejected(self):
        """Test a row whose (m, n) disagrees with its index is rejected"""
        with self.assertRaises(HestonError):
            CoefficientVector.from_rows(self.basis, [{'index': 1, 'm': 1, 'n': 0, 're': 1.0, 'im': 0.0}])


class ProjectionTest(SimpleTestCase):
    """Test weighted and plain projections"""

    def setUp(self):
        self.w = WeightParams(beta=2.0, gamma=2.0, mu=2.5)
        self.basis = TensorBasis(4, 4)
        self.grid = build_grid(self.w, GridSpec.from_settings().for_orders(4, 4))

    def test_gram_is_separable(self):
        """Test the Gram factors are symmetric positive definite"""
        Gx, Gxi = gram_factors(self.basis, self.grid, self.w)
        self.assertTrue(np.all(np.linalg.eigvalsh(Gx) > 0))
        self.assertTrue(np.all(np.linalg.eigvalsh(Gxi) > 0))
        self.assertGreater(gram_condition(Gx, Gxi), 1.0)

    def test_projection_reproduces_basis_function(self):
        """Test projecting e_12 returns the unit coefficient"""
        result = project(basis_function(self.basis, 1, 2), self.basis, self.grid, self.w)
        expected = CoefficientVector.unit(self.basis, 1, 2).values
        np.testing.assert_allclose(result.coefficients.values, expected, atol=1e-8)
        self.assertLess(result.residual, 1e-8 * max(result.norm_u0, 1.0))

    def test_rank_deficiency(self):
        """Test a Gram condition above the ceiling raises"""
        strict = dict(settings.HESTON, GRAM_CONDITION_MAX=1.0)
        with override_settings(HESTON=strict):
            with self.assertRaises(RankDeficiencyError) as ctx:
                project(basis_function(self.basis, 0, 0), self.basis, self.grid, self.w)
        self.assertGreater(ctx.exception.condition, 1.0)

    def test_suggested_scales_are_clipped(self):
        """Test suggested dilations stay in their ranges"""
        a, s = suggest_scales(self.w, 40, 40)
        self.assertTrue(0.5 <= a <= 4.0)
        self.assertTrue(1.0 <= s <= 200.0)

    def test_decay_constant(self):
        """Test the decay constant of e_00 is finite and positive"""
        result = decay_constant(CoefficientVector.unit(self.basis, 0, 0), r=0.1, vartheta=0.1)
        self.assertGreater(result['A'], 0.0)
        self.assertTrue(math.isfinite(result['A']))
