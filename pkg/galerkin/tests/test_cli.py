import hashlib
import json
import os
import subprocess
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

import galerkin
from galerkin.exporters import TRAJECTORY_COLUMNS, csv_bytes, json_safe, write_table
from hestonlab.settings import _version

from .helpers import BENCHMARK, REFERENCE, config_dict

SMALL = {'basis': {'mMax': 6, 'nMax': 6}, 'solve': {'dt': 0.05}}


class HestonCommandTest(SimpleTestCase):
    """Test the heston management command end to end"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def write_config(self, config, name='config.json'):
        path = self.root / name
        path.write_text(config if isinstance(config, str) else json.dumps(config))
        return str(path)

    def heston(self, subcommand, config, output='out'):
        """Run the command; returns (exit code, payload)"""
        stdout = StringIO()
        path = self.write_config(config)
        try:
            call_command('heston', subcommand, path, output_dir=str(self.root / output), stdout=stdout)
            code = 0
        except CommandError as exc:
            code = exc.returncode
        return code, json.loads(stdout.getvalue())

    def test_validate_admissible(self):
        """Test validate reports the reference set and writes admissibility.json"""
        code, payload = self.heston('validate', config_dict(weight={'gamma': 2.0}))
        self.assertEqual(code, 0)
        self.assertEqual(payload['status'], 'success')
        self.assertTrue(payload['data']['admissible'])
        self.assertAlmostEqual(payload['data']['betaMax'], 4.2)
        self.assertEqual(payload['data']['artifacts'], ['admissibility.json'])
        self.assertTrue((self.root / 'out' / 'admissibility.json').exists())

    def test_feller_failure(self):
        """Test an inadmissible set exits with status 2"""
        code, payload = self.heston('validate', config_dict(REFERENCE.with_overrides(kappa=0.5), weight={'gamma': 2.0}))
        self.assertEqual(code, 2)
        self.assertEqual(payload['status'], 'error')
        self.assertIn('FELLER_CONDITION', [v['rule'] for v in payload['errors']])

    def test_numeric_subcommand_refuses_inadmissible(self):
        """Test solve stops before assembly when the set is inadmissible"""
        code, _ = self.heston('solve', config_dict(REFERENCE.with_overrides(kappa=0.5), weight={'gamma': 2.0}))
        self.assertEqual(code, 2)
        self.assertFalse((self.root / 'out' / 'trajectory.csv').exists())

    def test_unknown_key(self):
        """Test unknown keys are reported with their JSON pointer"""
        config = config_dict()
        config['model']['foo'] = 1.0
        code, payload = self.heston('validate', config)
        self.assertEqual(code, 1)
        self.assertIn('/model/foo', payload['errors'])

    def test_malformed_json(self):
        """Test a file that is not JSON exits with status 1"""
        code, payload = self.heston('validate', '{"model": ')
        self.assertEqual(code, 1)
        self.assertEqual(payload['code'], 'malformed_config')

    def test_invalid_parameter(self):
        """Test sigma = 0 is a parameter invariant failure"""
        code, payload = self.heston('validate', config_dict(REFERENCE.with_overrides(sigma=0.0)))
        self.assertEqual(code, 2)
        self.assertIn('sigma > 0', payload['message'])

    def test_solve_writes_trajectory(self):
        """Test solve writes the trajectory table with a matching sidecar digest"""
        code, payload = self.heston('solve', config_dict(BENCHMARK, **SMALL))
        self.assertEqual(code, 0)
        self.assertTrue(payload['data']['trajectory']['passed'])
        out = self.root / 'out'
        csv = (out / 'trajectory.csv').read_bytes()
        self.assertEqual(csv.decode().splitlines()[0], 'step,t,h_norm,v_norm,envelope,slack,violated')
        self.assertEqual(len(csv.decode().splitlines()), 1 + 11)
        meta = json.loads((out / 'trajectory.meta.json').read_text())
        self.assertEqual(meta['sha256'], hashlib.sha256(csv).hexdigest())
        self.assertEqual(meta['file'], 'trajectory.csv')
        self.assertTrue((out / 'coefficients.csv').exists())

    def test_solve_is_deterministic(self):
        """Test two solves with the same config give byte-identical tables"""
        config = config_dict(BENCHMARK, **SMALL)
        self.heston('solve', config, output='first')
        self.heston('solve', config, output='second')
        for name in ('trajectory.csv', 'coefficients.csv'):
            self.assertEqual((self.root / 'first' / name).read_bytes(), (self.root / 'second' / name).read_bytes())

    def test_mc(self):
        """Test a small Monte Carlo run"""
        code, payload = self.heston('mc', config_dict(BENCHMARK, oracle={'paths': 2000, 'steps': 10, 'seed': 1}))
        self.assertEqual(code, 0)
        self.assertEqual(payload['data']['paths'], 2000)
        self.assertGreater(payload['data']['closedForm'], 0.0)

    def test_shift_outside_radius(self):
        """Test a shift beyond r' exits with status 2"""
        config = config_dict(BENCHMARK, shift={'runs': [{'omega': 0.7}]}, **SMALL)
        code, payload = self.heston('shift', config)
        self.assertEqual(code, 2)
        self.assertEqual(payload['code'], 'shift_not_admissible')

    def test_check_exports_matrices(self):
        """Test check writes matrices.npz and triplet tables and reports the weak residual and decay constant"""
        config = config_dict(BENCHMARK, check={'trials': 20, 'exportMatrices': True, 'omegas': [0.1]}, **SMALL)
        code, payload = self.heston('check', config)
        self.assertIn(code, (0, 3))
        out = self.root / 'out'
        with np.load(out / 'matrices.npz') as arrays:
            self.assertEqual(sorted(arrays.files), ['A', 'A_shift_0', 'M', 'S'])
            self.assertEqual(arrays['M'].shape, (49, 49))
            M = arrays['M']
        lines = (out / 'matrix_M.csv').read_text().splitlines()
        self.assertEqual(lines[0], 'row,col,re,im')
        self.assertEqual(len(lines) - 1, np.count_nonzero(M))
        self.assertTrue((out / 'matrix_A.meta.json').exists())
        self.assertLess(payload['data']['weakResidual'], 1e-8)
        self.assertGreater(payload['data']['decayConstant']['A'], 0.0)

    def test_check_without_export(self):
        """Test matrices are only exported on request"""
        config = config_dict(BENCHMARK, check={'trials': 20, 'weakResidual': False}, **SMALL)
        _, payload = self.heston('check', config)
        self.assertFalse((self.root / 'out' / 'matrices.npz').exists())
        self.assertNotIn('weakResidual', payload['data'])

    def test_shift_gamma_points(self):
        """Test points of Gamma run as complex-path solves and outside points exit with status 2"""
        path = {'kappa0': 0.1, 'nu0': 10.0, 'TPrime': 0.25, 'alpha': 0.5,
                'gammaPoints': [{'y': 0.01, 'omega': 0.01, 'tau': 0.01}]}
        code, payload = self.heston('shift', config_dict(BENCHMARK, path=path, **SMALL))
        self.assertIn(code, (0, 3))
        labels = [run['label'] for run in payload['data']['runs']]
        self.assertEqual(labels, ['shift(y=0, omega=0)', 'path(y0=0.01, omega0=0.01, phi=0.02)'])
        outside = dict(path, gammaPoints=[{'y': 0.05}])
        code, payload = self.heston('shift', config_dict(BENCHMARK, path=outside, **SMALL), output='outside')
        self.assertEqual(code, 2)
        self.assertEqual(payload['code'], 'path_not_admissible')

    def test_price_comparison(self):
        """Test price writes the surface and the comparison table"""
        config = config_dict(BENCHMARK, pricing={'relTolerance': 100.0}, **SMALL)
        code, payload = self.heston('price', config)
        self.assertEqual(code, 0)
        header = (self.root / 'out' / 'comparison.csv').read_text().splitlines()[0]
        self.assertEqual(header, 'method,price,reference,abs_error,rel_error,std_error')
        methods = [row['method'] for row in payload['data']['comparison']]
        self.assertEqual(methods, ['pde', 'closed_form', 'black_scholes'])
        self.assertIsNone(payload['data']['mc'])


class ExporterTest(SimpleTestCase):
    """Test CSV and JSON artifact helpers"""

    def test_csv_cells(self):
        """Test column order, repr floats, booleans and missing cells"""
        payload = csv_bytes(('a', 'b', 'c'), [{'a': np.float64(0.1), 'b': True}, {'c': 3}])
        self.assertEqual(payload.decode(), 'a,b,c\n0.1,1,\n,,3\n')

    def test_json_safe(self):
        """Test non-finite floats become null"""
        self.assertEqual(json_safe({'x': [float('inf'), 1.0], 'y': float('nan')}), {'x': [None, 1.0], 'y': None})

    def test_sidecar_hash_ignores_timestamp(self):
        """Test the sidecar digest covers the CSV bytes only"""
        with tempfile.TemporaryDirectory() as tmp:
            first = write_table(Path(tmp) / 'a', 'trajectory', TRAJECTORY_COLUMNS, [{'step': 0, 't': 0.0}], {'seed': 1})
            second = write_table(Path(tmp) / 'b', 'trajectory', TRAJECTORY_COLUMNS, [{'step': 0, 't': 0.0}], {'seed': 1})
            meta_a = json.loads(Path(first['meta']).read_text())
            meta_b = json.loads(Path(second['meta']).read_text())
            self.assertEqual(meta_a['sha256'], meta_b['sha256'])
            self.assertEqual(hashlib.sha256(Path(first['csv']).read_bytes()).hexdigest(), meta_a['sha256'])
            self.assertIn('generatedAt', meta_a)


class VersionTest(SimpleTestCase):
    """Test the version stamped into sidecars"""

    def test_environment_wins(self):
        """Test HESTON_VERSION overrides every other source"""
        with mock.patch.dict(os.environ, {'HESTON_VERSION': '2.0.0rc1'}):
            self.assertEqual(_version(), '2.0.0rc1')

    def test_git_describe(self):
        """Test the checkout description is used without HESTON_VERSION"""
        described = subprocess.CompletedProcess([], 0, stdout='v0.3.0-4-gabc1234\n', stderr='')
        with mock.patch.dict(os.environ, {'HESTON_VERSION': ''}), \
                mock.patch('hestonlab.settings.subprocess.run', return_value=described):
            self.assertEqual(_version(), 'v0.3.0-4-gabc1234')

    def test_package_fallback(self):
        """Test the package version is used outside a git checkout"""
        with mock.patch.dict(os.environ, {'HESTON_VERSION': ''}), \
                mock.patch('hestonlab.settings.subprocess.run', side_effect=OSError('git not found')):
            self.assertEqual(_version(), galerkin.__version__)

    def test_sidecar_carries_version(self):
        """Test sidecars record the configured version"""
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_table(Path(tmp), 'trajectory', TRAJECTORY_COLUMNS, [{'step': 0}])
            meta = json.loads(Path(paths['meta']).read_text())
        self.assertEqual(meta['version'], settings.HESTON['VERSION'])
        self.assertTrue(meta['version'])
