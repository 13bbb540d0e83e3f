"""
Galerkin matrices of the weighted Heston form and of its complex-shifted
variant, with boundedness and Garding certification.

Convention: Mat[j, k] = form(e_k, e_j), rows are test functions. For a state
u = sum c_k e_k this gives (A c)_j = a(u, e_j) and c^H A c = a(u, u).

The weight and all coefficients factorize in x and xi, so every block is a
Kronecker product of one-dimensional moment tables.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, solve_triangular, svdvals

from .basis import TensorBasis
from .exceptions import HestonError, ParameterMismatchError, ShiftNotAdmissible
from .params import CoercivityConstants, TransformedParams, WeightParams
from .quadspace import QuadratureGrid

logger = logging.getLogger(__name__)


def _settings():
    from django.conf import settings
    return settings.HESTON


@dataclass(frozen=True)
class ShiftParams:
    """y shifts x -> x + iy, omega the xi-ray xi(1 + i omega), omega_star a complex perturbation."""
    y: float = 0.0
    omega: float = 0.0
    omega_star: complex = 0.0

    @property
    def z(self) -> complex:
        return 1j * self.omega + self.omega_star

    @property
    def is_identity(self) -> bool:
        return self.omega == 0 and self.omega_star == 0

    def check_admissible(self, radius: Optional[float] = None) -> None:
        radius = _settings()['SHIFT_RADIUS'] if radius is None else radius
        if not abs(self.omega) < radius:
            raise ShiftNotAdmissible(f"|omega| = {abs(self.omega):.6g} must be < r' = {radius:.6g}",
                                     bound='|omega| < r\'', value=abs(self.omega))
        limit = min(0.5, radius)
        if abs(self.omega_star) > limit:
            raise ShiftNotAdmissible(f"|omega*| = {abs(self.omega_star):.6g} must be <= {limit:.6g}",
                                     bound='|omega*| <= 1/2', value=abs(self.omega_star))
        if not abs(self.y) < radius:
            raise ShiftNotAdmissible(f"|y| = {abs(self.y):.6g} must be < r' = {radius:.6g}",
                                     bound='|y| < r\'', value=abs(self.y))


def _moment(trial: np.ndarray, test: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """T[j, k] = sum_p test_j(p) trial_k(p) weights(p)."""
    return (test * weights) @ trial.T


def _symmetrized(table: np.ndarray) -> np.ndarray:
    return 0.5 * (table + table.T)


@dataclass(frozen=True, eq=False)
class FormTables:
    """One-dimensional moment tables; suffix d marks a trial/test derivative, _1 an extra xi factor."""
    X00: np.ndarray
    X00s: np.ndarray
    X10: np.ndarray
    X10s: np.ndarray
    X01: np.ndarray
    X11: np.ndarray
    X20: np.ndarray
    P00: np.ndarray
    P00_1: np.ndarray
    P10: np.ndarray
    P10_1: np.ndarray
    P11_1: np.ndarray
    P20_1: np.ndarray

    @classmethod
    def build(cls, basis: TensorBasis, grid: QuadratureGrid, w: WeightParams) -> 'FormTables':
        H0 = basis.hermite_table(grid.x)
        H1 = basis.hermite_table(grid.x, 1)
        H2 = basis.hermite_table(grid.x, 2)
        L0 = basis.laguerre_table(grid.xi)
        L1 = basis.laguerre_table(grid.xi, 1)
        L2 = basis.laguerre_table(grid.xi, 2)

        gx = grid.weight_x(w)
        gxs = gx * np.sign(grid.x)
        g0 = grid.weight_xi(w)
        g1 = grid.weight_xi(w, power=1.0)
        return cls(
            X00=_symmetrized(_moment(H0, H0, gx)),
            X00s=_symmetrized(_moment(H0, H0, gxs)),
            X10=_moment(H1, H0, gx),
            X10s=_moment(H1, H0, gxs),
            X01=_moment(H0, H1, gx),
            X11=_symmetrized(_moment(H1, H1, gx)),
            X20=_moment(H2, H0, gx),
            P00=_symmetrized(_moment(L0, L0, g0)),
            P00_1=_symmetrized(_moment(L0, L0, g1)),
            P10=_moment(L1, L0, g0),
            P10_1=_moment(L1, L0, g1),
            P11_1=_symmetrized(_moment(L1, L1, g1)),
            P20_1=_moment(L2, L0, g1),
        )

    def kron(self, x_table: str, xi_table: str) -> np.ndarray:
        return np.kron(getattr(self, x_table), getattr(self, xi_table))


@dataclass(eq=False)
class OperatorMatrices:
    basis: TensorBasis
    params: TransformedParams
    weight: WeightParams
    tables: FormTables
    M: np.ndarray
    S: np.ndarray
    A: np.ndarray

    def matches(self, t: TransformedParams, w: WeightParams) -> bool:
        return self.params == t and self.weight == w

    def require(self, t: TransformedParams, w: WeightParams) -> None:
        if not self.matches(t, w):
            raise ParameterMismatchError('Matrices were assembled for different parameters')

    @property
    def drift_coefficient(self) -> float:
        """beta sigma / 2 - kappa theta_sigma, the coefficient of the first-order xi term."""
        t, w = self.params, self.weight
        return w.beta * t.sigma / 2.0 - t.kappa_star * t.theta_sigma

    @cached_property
    def templates(self) -> Dict[str, np.ndarray]:
        """Shift-independent blocks of the shifted form."""
        tb = self.tables
        return {
            'D1': tb.kron('X11', 'P00_1'),
            'D2': tb.kron('X00', 'P11_1'),
            'D3': np.kron(tb.X10 - self.weight.gamma * tb.X10s, tb.P00_1),
            'D4': tb.kron('X00', 'P10_1'),
            'D5': tb.kron('X00', 'P10'),
        }

    def shifted(self, omega: float = 0.0, omega_star: complex = 0.0) -> np.ndarray:
        """Form matrix of the shifted operator; exactly A when omega = omega* = 0."""
        z = 1j * omega + omega_star
        if z == 0:
            return self.A.astype(complex)
        sigma, mu = self.params.sigma, self.weight.mu
        z1 = z / (1.0 + z)
        D = self.templates
        return (
            self.A
            + (sigma / 2.0) * z * (D['D1'] - D['D2'] / (1.0 + z))
            + (sigma / 2.0) * z * D['D3']
            + (sigma / 2.0) * z1 * mu * D['D4']
            - z1 * self.drift_coefficient * D['D5']
        )

    def shift_derivative(self) -> np.ndarray:
        """d A_shift / d omega at omega = omega* = 0."""
        sigma, mu = self.params.sigma, self.weight.mu
        D = self.templates
        return 1j * (
            (sigma / 2.0) * (D['D1'] - D['D2'])
            + (sigma / 2.0) * D['D3']
            + (sigma / 2.0) * mu * D['D4']
            - self.drift_coefficient * D['D5']
        )

    @property
    def energy(self) -> np.ndarray:
        """Gram matrix of the V-product, S + M."""
        return self.S + self.M


def assemble(basis: TensorBasis, grid: QuadratureGrid, t: TransformedParams, w: WeightParams) -> OperatorMatrices:
    """
    Assemble M, S and the form matrix A.

    Args:
        basis: tensor basis
        grid: weighted quadrature grid split at x = 0
        t: transformed parameters
        w: weight parameters

    Returns:
        OperatorMatrices
    """
    if not np.any(grid.x_breaks == 0.0):
        raise HestonError('Quadrature grid must have a panel break at x = 0', code='grid_not_split')

    tb = FormTables.build(basis, grid, w)
    sigma, rho, kappa = t.sigma, t.rho, t.kappa_star
    gamma, mu, beta = w.gamma, w.mu, w.beta

    M = np.kron(tb.X00, tb.P00)
    S = np.kron(tb.X11, tb.P00_1) + np.kron(tb.X00, tb.P11_1)

    A = (sigma / 2.0) * np.kron(tb.X11, tb.P00_1)
    if rho != 0:
        A += sigma * rho * np.kron(tb.X01, tb.P10_1)
    A += (sigma / 2.0) * np.kron(tb.X00, tb.P11_1)
    A += (sigma / 2.0) * np.kron(tb.X10 - gamma * tb.X10s, tb.P00_1)
    A += np.kron((kappa - mu * sigma / 2.0) * tb.X00 - gamma * rho * sigma * tb.X00s, tb.P10_1)
    if t.q_r != 0:
        A += t.q_r * np.kron(tb.X10, tb.P00)
    A += (beta * sigma / 2.0 - kappa * t.theta_sigma) * np.kron(tb.X00, tb.P10)

    mats = OperatorMatrices(basis=basis, params=t, weight=w, tables=tb, M=M, S=S, A=A)
    if not all(np.all(np.isfinite(mat)) for mat in (M, S, A)):
        raise HestonError('Assembled matrices have non-finite entries', code='non_finite')
    logger.info("Assembled %dx%d Galerkin system (N=%d)", basis.m_max + 1, basis.n_max + 1, basis.size)
    return mats


def assemble_shifted(mats: OperatorMatrices, s: ShiftParams, radius: Optional[float] = None) -> np.ndarray:
    """A_shift(omega, omega*); y never enters the form."""
    s.check_admissible(radius)
    return mats.shifted(s.omega, s.omega_star)


def direct_form_entry(basis: TensorBasis, grid: QuadratureGrid, t: TransformedParams, w: WeightParams,
                      j: int, k: int) -> float:
    """a(e_k, e_j) from the full two-dimensional integrand on the mesh."""
    X, XI = grid.mesh()
    mk, nk = basis.orders(k)
    mj, nj = basis.orders(j)

    def parts(m, n):
        hx = basis.hermite_table(X.ravel(), 0)[m].reshape(X.shape)
        hx1 = basis.hermite_table(X.ravel(), 1)[m].reshape(X.shape)
        lx = basis.laguerre_table(XI.ravel(), 0)[n].reshape(X.shape)
        lx1 = basis.laguerre_table(XI.ravel(), 1)[n].reshape(X.shape)
        return hx * lx, hx1 * lx, hx * lx1

    u, ux, uxi = parts(mk, nk)
    v, vx, vxi = parts(mj, nj)
    quad = np.outer(grid.wx, grid.wxi)
    weight = XI ** (w.beta - 1.0) * np.exp(-w.gamma * np.abs(X) - w.mu * XI)
    sgn = np.sign(X)
    sigma, rho, kappa = t.sigma, t.rho, t.kappa_star

    integrand = (
        (sigma / 2.0) * (ux * vx + 2.0 * rho * uxi * vx + uxi * vxi) * XI
        + (sigma / 2.0) * (1.0 - w.gamma * sgn) * ux * v * XI
        + (kappa - w.gamma * rho * sigma * sgn - w.mu * sigma / 2.0) * uxi * v * XI
        + t.q_r * ux * v
        + (w.beta * sigma / 2.0 - kappa * t.theta_sigma) * uxi * v
    )
    return float(np.sum(integrand * weight * quad))


@dataclass
class CertReport:
    name: str
    passed: bool
    trials: int
    worst_slack: float
    worst_relative_slack: float
    constants: Dict[str, float] = field(default_factory=dict)
    empirical_constant: Optional[float] = None
    sweep: List[Dict] = field(default_factory=list)

    @property
    def violations(self) -> List[Dict]:
        if self.passed:
            return []
        return [{
            'rule': self.name.upper(),
            'description': f"worst relative slack {self.worst_relative_slack:.3e}",
            'severity': 'critical',
        }]


def _random_states(size: int, trials: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((trials, size)) + 1j * rng.standard_normal((trials, size))


def _quadratic(mat: np.ndarray, c: np.ndarray) -> complex:
    return complex(np.vdot(c, mat @ c))


def garding_slacks(A: np.ndarray, mats: OperatorMatrices, lower: float, c2: float,
                   states: np.ndarray) -> Dict[str, float]:
    """Slack 2 Re c^H A c - lower c^H(S+M)c + c2 c^H M c, worst absolute and relative over states."""
    E = mats.energy
    worst, worst_rel, needed = math.inf, math.inf, -math.inf
    for c in states:
        energy = _quadratic(E, c).real
        mass = _quadratic(mats.M, c).real
        form = 2.0 * _quadratic(A, c).real
        slack = form - lower * energy + c2 * mass
        worst = min(worst, slack)
        if energy > 0:
            worst_rel = min(worst_rel, slack / energy)
        if mass > 0:
            needed = max(needed, (lower * energy - form) / mass)
    return {'worst': worst, 'relative': worst_rel, 'needed': needed}


def certify_garding(mats: OperatorMatrices, constants: CoercivityConstants, trials: int = 500,
                    seed: int = 0, omegas: Sequence[float] = (), eps_q: Optional[float] = None) -> CertReport:
    """
    Random-state check of 2 Re a(u, u) >= sigma(1 - |rho|) ||u||_V^2 - c2' ||u||_H^2.

    With omegas given, the shifted form is checked at each omega with the
    lower constant sigma(1 - |rho|)/2 and c2'' = c2'; the sweep records the
    smallest c2'' each shift actually needs.
    """
    eps_q = _settings()['EPS_Q'] if eps_q is None else eps_q
    t = mats.params
    lower = t.sigma * (1.0 - abs(t.rho))
    states = _random_states(mats.basis.size, trials, seed)
    states /= np.sqrt(np.einsum('ti,ij,tj->t', states.conj(), mats.M, states).real)[:, None]

    real = garding_slacks(mats.A, mats, lower, constants.c2_prime, states)
    passed = real['relative'] >= -eps_q
    sweep = []
    for omega in omegas:
        shifted = garding_slacks(mats.shifted(omega), mats, lower / 2.0, constants.c2_prime, states)
        ok = shifted['relative'] >= -eps_q
        sweep.append({'omega': float(omega), 'worstSlack': shifted['worst'],
                      'relativeSlack': shifted['relative'], 'c2Needed': shifted['needed'], 'passed': ok})
        passed = passed and ok

    report = CertReport(
        name='garding',
        passed=bool(passed),
        trials=trials,
        worst_slack=real['worst'],
        worst_relative_slack=real['relative'],
        constants={'lower': lower, 'c2Prime': constants.c2_prime, 'epsQ': eps_q},
        empirical_constant=real['needed'],
        sweep=sweep,
    )
    log = logger.info if report.passed else logger.warning
    log("Garding certification %s: worst relative slack %.3e over %d states, %d shifts",
        'passed' if report.passed else 'FAILED', real['relative'], trials, len(sweep))
    return report


def explicit_boundedness_constant(t: TransformedParams, w: WeightParams, constants: CoercivityConstants) -> float:
    """(sigma/2) sqrt(6) + M1 max{1, Sobolev factor, Hardy factor}."""
    sobolev = math.sqrt((2.0 / w.mu) ** 2 + 2.0 * w.beta / w.mu)
    hardy = math.sqrt(8.0 / (w.beta - 1.0) ** 2 + 2.0 * w.mu ** 2 / (w.beta - 1.0) ** 2)
    return (t.sigma / 2.0) * math.sqrt(6.0) + constants.M1 * max(1.0, sobolev, hardy)


def bounded_ratio(A: np.ndarray, E: np.ndarray, c: np.ndarray, d: np.ndarray) -> float:
    """|c^H A d| / (||c||_V ||d||_V), 0 when either state vanishes."""
    nc = math.sqrt(max(_quadratic(E, c).real, 0.0))
    nd = math.sqrt(max(_quadratic(E, d).real, 0.0))
    if nc == 0 or nd == 0:
        return 0.0
    return abs(np.vdot(c, A @ d)) / (nc * nd)


def discrete_form_norm(A: np.ndarray, E: np.ndarray) -> float:
    """sup |c^H A d| / (||c||_V ||d||_V) over the span, via the Cholesky factor of S + M."""
    factor, lower = cho_factor(E, lower=True)
    Linv_A = solve_triangular(factor, A, lower=True)
    B = solve_triangular(factor, Linv_A.conj().T, lower=True).conj().T
    return float(svdvals(B)[0])


def certify_bounded(mats: OperatorMatrices, constants: CoercivityConstants, trials: int = 500,
                    seed: int = 1) -> CertReport:
    """Sampled and exact discrete form norm against the explicit constant."""
    C = explicit_boundedness_constant(mats.params, mats.weight, constants)
    E = mats.energy
    rng_states = _random_states(mats.basis.size, 2 * trials, seed)
    worst_ratio = 0.0
    for c, d in zip(rng_states[:trials], rng_states[trials:]):
        worst_ratio = max(worst_ratio, bounded_ratio(mats.A, E, c, d), bounded_ratio(mats.A, E, c, c))
    sup = discrete_form_norm(mats.A, E)
    passed = max(worst_ratio, sup) <= C
    report = CertReport(
        name='bounded',
        passed=bool(passed),
        trials=trials,
        worst_slack=C - max(worst_ratio, sup),
        worst_relative_slack=(C - max(worst_ratio, sup)) / C,
        constants={'C': C, 'M1': constants.M1, 'sampledRatio': worst_ratio, 'discreteNorm': sup},
        empirical_constant=sup,
    )
    logger.info("Boundedness: sampled %.4g, discrete norm %.4g, explicit C %.4g", worst_ratio, sup, C)
    return report


def boundary_diagnostic(mats: OperatorMatrices, grid: QuadratureGrid) -> Dict[str, float]:
    """
    Largest boundary integrand of the form over all basis pairs at xi -> 0+,
    xi = Xi_max and x = +-X_max; the weak form drops these terms.
    """
    basis, w, sigma = mats.basis, mats.weight, mats.params.sigma
    xi_edges = {'xiZero': grid.xi_breaks[1] * 1e-6, 'xiMax': grid.xi_max}
    result = {}
    x_mass = np.max(np.abs(mats.tables.X00))
    for label, xi in xi_edges.items():
        values = basis.laguerre_table(np.array([xi]))[:, 0]
        slopes = basis.laguerre_table(np.array([xi]), 1)[:, 0]
        edge = xi ** w.beta * math.exp(-w.mu * xi)
        result[label] = float((sigma / 2.0) * x_mass * np.max(np.abs(np.outer(values, slopes))) * edge)

    xi_mass = np.max(np.abs(mats.tables.P00_1))
    x = np.array([grid.x_max])
    edge = math.exp(-w.gamma * grid.x_max)
    values = basis.hermite_table(x)[:, 0]
    slopes = basis.hermite_table(x, 1)[:, 0]
    result['xMax'] = float((sigma / 2.0) * xi_mass * np.max(np.abs(np.outer(values, slopes))) * edge)
    result['passed'] = all(value < 1e-10 for value in result.values())
    return result


def export_npz(mats: OperatorMatrices, path: Path, shifts: Iterable[ShiftParams] = ()) -> Path:
    arrays = {'M': mats.M, 'S': mats.S, 'A': mats.A}
    for index, s in enumerate(shifts):
        arrays[f'A_shift_{index}'] = mats.shifted(s.omega, s.omega_star)
    np.savez(path, **arrays)
    return Path(path)


def triplet_rows(matrix: np.ndarray, threshold: float = 0.0) -> List[Dict]:
    """CSV triplets (row, col, re, im) of the entries above threshold in magnitude."""
    rows = []
    for j, k in zip(*np.nonzero(np.abs(matrix) > threshold)):
        value = complex(matrix[j, k])
        rows.append({'row': int(j), 'col': int(k), 're': value.real, 'im': value.imag})
    return rows
