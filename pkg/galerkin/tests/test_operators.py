import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from galerkin.basis import gram_factors
from galerkin.exceptions import HestonError, ShiftNotAdmissible
from galerkin.operators import (
    ShiftParams,
    assemble,
    assemble_shifted,
    boundary_diagnostic,
    certify_bounded,
    certify_garding,
    direct_form_entry,
    discrete_form_norm,
    explicit_boundedness_constant,
    export_npz,
    triplet_rows,
)
from galerkin.params import transform

from .helpers import REFERENCE, admissible_setup


class AssemblyTest(SimpleTestCase):
    """Test assembly of M, S and A"""

    def setUp(self):
        self.report, self.basis, self.grid, self.mats = admissible_setup(orders=5)
        self.t = transform(REFERENCE)

    def test_mass_matrix(self):
        """Test M is the Kronecker product of the Gram factors and is positive definite"""
        Gx, Gxi = gram_factors(self.basis, self.grid, self.report.weight)
        np.testing.assert_allclose(self.mats.M, np.kron(Gx, Gxi), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(self.mats.M, self.mats.M.T)
        self.assertTrue(np.all(np.linalg.eigvalsh(self.mats.M) > 0))
        self.assertTrue(np.all(np.linalg.eigvalsh(self.mats.energy) > 0))

    def test_form_entries_match_direct_integration(self):
        """Test A[j, k] = a(e_k, e_j) against the two-dimensional integrand"""
        w = self.report.weight
        for j, k in [(0, 0), (1, 0), (0, 1), (7, 3), (13, 22), (35, 35)]:
            expected = direct_form_entry(self.basis, self.grid, self.t, w, j, k)
            self.assertAlmostEqual(self.mats.A[j, k], expected, delta=1e-9 * max(1.0, abs(expected)))

    def test_grid_must_split_at_zero(self):
        """Test assembly refuses a grid without a break at x = 0"""
        shifted_grid = replace(self.grid, x_breaks=self.grid.x_breaks + 0.1)
        with self.assertRaises(HestonError) as ctx:
            assemble(self.basis, shifted_grid, self.t, self.report.weight)
        self.assertEqual(ctx.exception.code, 'grid_not_split')

    def test_parameter_match(self):
        """Test matrices remember the parameters they were assembled with"""
        self.assertTrue(self.mats.matches(self.t, self.report.weight))
        other = transform(REFERENCE.with_overrides(kappa=4.0))
        self.assertFalse(self.mats.matches(other, self.report.weight))

    def test_exports(self):
        """Test npz export and CSV triplets"""
        with tempfile.TemporaryDirectory() as tmp:
            path = export_npz(self.mats, Path(tmp) / 'matrices.npz', [ShiftParams(omega=0.1)])
            with np.load(path) as data:
                self.assertEqual(set(data.files), {'M', 'S', 'A', 'A_shift_0'})
                np.testing.assert_array_equal(data['A'], self.mats.A)
        rows = triplet_rows(self.mats.M)
        self.assertEqual(len(rows), int(np.count_nonzero(self.mats.M)))
        self.assertEqual(set(rows[0]), {'row', 'col', 're', 'im'})


class ShiftTest(SimpleTestCase):
    """Test the shifted form"""

    def setUp(self):
        self.report, self.basis, self.grid, self.mats = admissible_setup(orders=5)

    def test_zero_shift_is_identity(self):
        """Test A_shift(0) equals A exactly"""
        np.testing.assert_array_equal(self.mats.shifted(0.0), self.mats.A)
        np.testing.assert_array_equal(assemble_shifted(self.mats, ShiftParams(y=0.2)), self.mats.A)

    def test_conjugate_shifts(self):
        """Test A_shift(-omega) = conj(A_shift(omega))"""
        np.testing.assert_allclose(self.mats.shifted(-0.1), np.conj(self.mats.shifted(0.1)), atol=1e-12)

    def test_shift_derivative(self):
        """Test dA/domega against a central difference"""
        h = 1e-5
        fd = (self.mats.shifted(h) - self.mats.shifted(-h)) / (2 * h)
        scale = np.max(np.abs(self.mats.shift_derivative()))
        np.testing.assert_allclose(self.mats.shift_derivative(), fd, atol=1e-6 * scale)

    def test_admissibility(self):
        """Test shifts outside r' are rejected"""
        for s in (ShiftParams(omega=0.6), ShiftParams(omega_star=0.6), ShiftParams(y=0.5)):
            with self.assertRaises(ShiftNotAdmissible):
                s.check_admissible()
        ShiftParams(y=0.1, omega=0.1, omega_star=0.2j).check_admissible()
        with self.assertRaises(ShiftNotAdmissible):
            ShiftParams(omega=0.3).check_admissible(radius=0.25)


class CertificationTest(SimpleTestCase):
    """Test the Garding and boundedness certifications"""

    def setUp(self):
        self.report, self.basis, self.grid, self.mats = admissible_setup(orders=6)

    def test_garding_small_basis(self):
        """Test Garding holds on random states with a shift sweep"""
        cert = certify_garding(self.mats, self.report.constants, trials=100, omegas=(-0.1, 0.1))
        self.assertTrue(cert.passed)
        self.assertEqual(cert.violations, [])
        self.assertEqual(len(cert.sweep), 2)
        self.assertGreaterEqual(cert.worst_relative_slack, -1e-6)
        self.assertLessEqual(cert.empirical_constant, self.report.constants.c2_prime)

    def test_bounded(self):
        """Test the discrete form norm stays below the explicit constant"""
        cert = certify_bounded(self.mats, self.report.constants, trials=100)
        C = explicit_boundedness_constant(self.mats.params, self.mats.weight, self.report.constants)
        self.assertTrue(cert.passed)
        self.assertAlmostEqual(cert.constants['C'], C)
        self.assertLessEqual(cert.constants['sampledRatio'], discrete_form_norm(self.mats.A, self.mats.energy) * (1 + 1e-9))

    def test_boundary_terms(self):
        """Test the dropped boundary integrands are negligible"""
        result = boundary_diagnostic(self.mats, self.grid)
        self.assertEqual(set(result), {'xiZero', 'xiMax', 'xMax', 'passed'})
        self.assertLess(result['xMax'], 1e-10)

    @tag('slow')
    def test_garding_sixteen_by_sixteen(self):
        """Test Garding with 500 states on a 16x16 basis, shifted over |omega| <= 0.1"""
        report, basis, grid, mats = admissible_setup(orders=16)
        cert = certify_garding(mats, report.constants, trials=500, omegas=(-0.1, -0.05, 0.05, 0.1))
        self.assertTrue(cert.passed, cert.sweep)
