"""
Time stepping of M c' + A c = f (real, shifted and along a complex path)
with the energy-envelope checks.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from .basis import CoefficientVector, project
from .exceptions import HestonError, LinearSolveError, PathNotAdmissible
from .operators import OperatorMatrices, ShiftParams
from .params import WeightParams
from .quadspace import QuadratureGrid, WeightedFunction

logger = logging.getLogger(__name__)


def _settings():
    from django.conf import settings
    return settings.HESTON


def step_count(length: float, dt: float) -> int:
    """Number of equal steps of size at most dt covering length."""
    return max(1, int(math.ceil(length / dt - 1e-9)))


@dataclass(frozen=True)
class SolveConfig:
    dt: float
    t_end: float
    theta_scheme: float = 1.0
    forcing: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise HestonError('dt must be positive', code='invalid_solve_config')
        if not self.t_end >= self.dt:
            raise HestonError('t_end must be at least dt', code='invalid_solve_config')
        if not 0.5 <= self.theta_scheme <= 1.0:
            raise HestonError('theta_scheme must lie in [1/2, 1]', code='invalid_solve_config')

    @property
    def steps(self) -> int:
        return step_count(self.t_end, self.dt)


@dataclass(frozen=True)
class PathParams:
    y0: float = 0.0
    omega0: float = 0.0
    phi: float = 0.0
    T_prime: float = 0.25
    kappa0: float = 0.1
    nu0: float = 10.0

    def check_admissible(self) -> None:
        if not (self.kappa0 > 0 and self.nu0 > 0 and self.T_prime > 0):
            raise PathNotAdmissible('kappa0, nu0 and T\' must be positive', bound='positivity')
        reach = self.kappa0 * self.T_prime
        if reach > math.pi / 4.0:
            raise PathNotAdmissible(f"kappa0 T' = {reach:.6g} must be <= pi/4", bound="kappa0 T' <= pi/4")
        spread = max(abs(self.y0), abs(math.atan(self.omega0)))
        if not spread < reach:
            raise PathNotAdmissible(
                f"max(|y0|, |arctan omega0|) = {spread:.6g} must be < kappa0 T' = {reach:.6g}",
                bound="max(|y0|, |arctan omega0|) < kappa0 T'",
            )
        if not abs(self.phi) < 1.0 / self.nu0:
            raise PathNotAdmissible(f"|phi| = {abs(self.phi):.6g} must be < 1/nu0 = {1.0 / self.nu0:.6g}",
                                    bound='|phi| < 1/nu0')

    @property
    def is_trivial(self) -> bool:
        return self.y0 == 0 and self.omega0 == 0 and self.phi == 0

    def chi(self, s: float) -> Tuple[float, float]:
        """chi(s/T') = min(s/T', 1) and its derivative in the scaled argument."""
        ratio = s / self.T_prime
        return (ratio, 1.0) if ratio < 1.0 else (1.0, 0.0)


@dataclass
class TrajectoryReport:
    times: List[float] = field(default_factory=list)
    h_norms: List[float] = field(default_factory=list)
    v_norms: List[float] = field(default_factory=list)
    envelope: List[float] = field(default_factory=list)
    violated: List[bool] = field(default_factory=list)
    rejected_steps: List[int] = field(default_factory=list)
    growth_limit: float = 0.0
    final: Optional[CoefficientVector] = None
    label: str = ''
    states: Optional[List[np.ndarray]] = None

    def record(self, t: float, h_norm: float, v_norm: float, bound: float, tol: float) -> None:
        self.times.append(t)
        self.h_norms.append(h_norm)
        self.v_norms.append(v_norm)
        self.envelope.append(bound)
        self.violated.append(bool(h_norm > bound * (1.0 + tol)))

    @property
    def slack(self) -> List[float]:
        return [bound - norm for bound, norm in zip(self.envelope, self.h_norms)]

    @property
    def passed(self) -> bool:
        return not any(self.violated) and not self.rejected_steps

    @property
    def worst_relative_slack(self) -> float:
        return min((bound - norm) / bound if bound > 0 else 0.0
                   for bound, norm in zip(self.envelope, self.h_norms))

    @property
    def growth_rate(self) -> float:
        """Largest log-norm slope between consecutive steps."""
        rates = []
        for k in range(1, len(self.times)):
            a, b = self.h_norms[k - 1], self.h_norms[k]
            dt = self.times[k] - self.times[k - 1]
            if a > 0 and b > 0 and dt > 0:
                rates.append((math.log(b) - math.log(a)) / dt)
        return max(rates) if rates else 0.0

    @property
    def violations(self) -> List[Dict]:
        found = [
            {'rule': 'ENVELOPE', 'description': f"step {k}: norm {self.h_norms[k]:.6g} > envelope {self.envelope[k]:.6g}",
             'severity': 'critical'}
            for k, bad in enumerate(self.violated) if bad
        ]
        found.extend(
            {'rule': 'STEP_GROWTH', 'description': f"step {k}: discrete derivative bound exceeded",
             'severity': 'critical'}
            for k in self.rejected_steps
        )
        return found

    def to_rows(self) -> List[Dict]:
        return [
            {'step': k, 't': t, 'h_norm': h, 'v_norm': v, 'envelope': e, 'slack': e - h, 'violated': int(bad)}
            for k, (t, h, v, e, bad) in enumerate(zip(self.times, self.h_norms, self.v_norms,
                                                      self.envelope, self.violated))
        ]


def _norms(mats: OperatorMatrices, c: np.ndarray) -> Tuple[float, float]:
    mass = np.vdot(c, mats.M @ c).real
    energy = np.vdot(c, mats.energy @ c).real
    return math.sqrt(max(mass, 0.0)), math.sqrt(max(energy, 0.0))


def _factor(matrix: np.ndarray, step: int):
    try:
        lu = lu_factor(matrix, check_finite=True)
    except (LinAlgError, ValueError):
        raise LinearSolveError(np.linalg.cond(matrix), step=step)
    pivots = np.abs(np.diag(lu[0]))
    if pivots.min() == 0 or pivots.min() < 1e-14 * pivots.max():
        raise LinearSolveError(np.linalg.cond(matrix), step=step)
    return lu


def _theta_march(mats: OperatorMatrices, A: np.ndarray, c0: np.ndarray, cfg: SolveConfig,
                 growth: float, report: TrajectoryReport) -> np.ndarray:
    tol = _settings()['ENVELOPE_TOL']
    n = cfg.steps
    dt = cfg.t_end / n
    theta = cfg.theta_scheme
    M = mats.M.astype(complex)
    A = np.asarray(A, dtype=complex)
    lhs = _factor(M + dt * theta * A, 0)
    rhs = M - dt * (1.0 - theta) * A

    c = np.asarray(c0, dtype=complex).copy()
    norm0, energy0 = _norms(mats, c)
    forcing_mass = 0.0
    f_prev = None if cfg.forcing is None else np.asarray(cfg.forcing(0.0), dtype=complex)
    report.record(0.0, norm0, energy0, norm0, tol)
    if report.states is not None:
        report.states.append(c.copy())

    for k in range(1, n + 1):
        t = k * dt
        b = rhs @ c
        if cfg.forcing is not None:
            f_next = np.asarray(cfg.forcing(t), dtype=complex)
            b = b + dt * (M @ (theta * f_next + (1.0 - theta) * f_prev))
            forcing_mass += 0.5 * dt * (_norms(mats, f_prev)[0] + _norms(mats, f_next)[0])
            f_prev = f_next
        c = lu_solve(lhs, b)
        if not np.all(np.isfinite(c)):
            raise LinearSolveError(np.linalg.cond(M + dt * theta * A), step=k)
        h_norm, v_norm = _norms(mats, c)
        report.record(t, h_norm, v_norm, math.exp(growth * t) * (norm0 + forcing_mass), tol)
        if report.states is not None:
            report.states.append(c.copy())
    return c


def evolve(mats: OperatorMatrices, c0: CoefficientVector, cfg: SolveConfig,
           c2_prime: float, label: str = 'real', keep_states: bool = False) -> TrajectoryReport:
    """
    Theta-scheme (M + dt theta A) c+ = (M - dt(1 - theta) A) c + dt M f_theta.

    Records ||c||_M, ||c||_V and the envelope exp(c2'/2 t)(||c0||_M + int ||f||_M);
    a violated envelope is flagged on the report.
    """
    if c0.basis != mats.basis:
        raise HestonError('Initial state and matrices use different bases', code='basis_mismatch')
    report = TrajectoryReport(growth_limit=c2_prime / 2.0, label=label, states=[] if keep_states else None)
    final = _theta_march(mats, mats.A, c0.values, cfg, c2_prime / 2.0, report)
    report.final = CoefficientVector(mats.basis, final)
    _log_outcome(report)
    return report


def shifted_initial_state(c0: CoefficientVector, s: ShiftParams, grid: QuadratureGrid,
                          w: WeightParams) -> CoefficientVector:
    """H-projection of u0(x + iy, xi(1 + i omega)) with u0 the expansion c0."""
    if s.y == 0 and s.omega == 0:
        return CoefficientVector(c0.basis, c0.values.copy())
    basis = c0.basis
    shifted = WeightedFunction(
        values=lambda X, XI: basis.eval_mesh(c0, X[:, 0] + 1j * s.y, XI[0, :] * (1.0 + 1j * s.omega)),
        name=f'u0 shifted by (y={s.y:g}, omega={s.omega:g})',
    )
    return project(shifted, basis, grid, w).coefficients


def evolve_shifted(mats: OperatorMatrices, c0: CoefficientVector, s: ShiftParams, cfg: SolveConfig,
                   c2_prime: float, grid: QuadratureGrid, radius: Optional[float] = None) -> TrajectoryReport:
    """Solve with A_shift(omega) from the shifted initial data projected on grid."""
    s.check_admissible(radius)
    v0 = shifted_initial_state(c0, s, grid, mats.weight)
    report = TrajectoryReport(growth_limit=c2_prime / 2.0, label=f'shift(y={s.y:g}, omega={s.omega:g})')
    A = mats.shifted(s.omega, s.omega_star)
    final = _theta_march(mats, A, v0.values, cfg, c2_prime / 2.0, report)
    report.final = CoefficientVector(mats.basis, final)
    _log_outcome(report)
    return report


def path_operator(mats: OperatorMatrices, p: PathParams, s: float, integrate_by_parts: bool = False) -> np.ndarray:
    """
    K(s) in M dv/ds = -K(s) v:
    (1 + i phi)A - i(y0/T')L1 - i(omega0/T')L2 + (i/2)(1 + i phi) sigma omega0 L3 + i(1 + i phi) kappa theta_sigma omega0 L4.
    """
    if p.is_trivial:
        return mats.A.astype(complex)
    chi, dchi = p.chi(s)
    tb = mats.tables
    t = mats.params
    phase = 1.0 + 1j * p.phi
    ray = 1.0 / (1.0 + 1j * chi * p.omega0)

    K = phase * mats.A.astype(complex)
    if dchi:
        L1 = dchi * np.kron(tb.X10, tb.P00)
        L2 = dchi * ray * np.kron(tb.X00, tb.P10_1)
        K = K - 1j * (p.y0 / p.T_prime) * L1 - 1j * (p.omega0 / p.T_prime) * L2
    if p.omega0 == 0 or chi == 0:
        return K
    if integrate_by_parts:
        return K + phase * (mats.shifted(chi * p.omega0) - mats.A)
    L3 = -chi * (np.kron(tb.X20, tb.P00_1) - ray * np.kron(tb.X00, tb.P20_1) - np.kron(tb.X10, tb.P00_1))
    L4 = chi * ray * np.kron(tb.X00, tb.P10)
    return (K + 0.5j * phase * t.sigma * p.omega0 * L3
            + 1j * phase * t.kappa_star * t.theta_sigma * p.omega0 * L4)


def path_steps(alpha: float, T_prime: float, dt: float) -> List[Tuple[float, float]]:
    """(start, ds) per step on [0, alpha]; s = T' is a step boundary whenever T' < alpha."""
    segments = [(0.0, alpha)] if T_prime >= alpha else [(0.0, T_prime), (T_prime, alpha)]
    steps = []
    for start, stop in segments:
        n = step_count(stop - start, dt)
        ds = (stop - start) / n
        steps.extend((start + i * ds, ds) for i in range(n))
    return steps


def evolve_along_path(mats: OperatorMatrices, c0: CoefficientVector, p: PathParams, alpha: float,
                      cfg: SolveConfig, c2_prime: float, integrate_by_parts: bool = False) -> TrajectoryReport:
    """
    Solve along the complex path up to alpha and check
    ||v_(n+1)||^2 <= exp(c2' ds) ||v_n||^2 per step and ||v(s)||^2 <= exp(c2' s) ||v0||^2.
    """
    p.check_admissible()
    if not alpha > 0:
        raise PathNotAdmissible('alpha must be positive', bound='alpha > 0')
    tol = _settings()['ENVELOPE_TOL']
    theta = cfg.theta_scheme
    report = TrajectoryReport(growth_limit=c2_prime, label=f'path(y0={p.y0:g}, omega0={p.omega0:g}, phi={p.phi:g})')

    M = mats.M.astype(complex)
    steps = path_steps(alpha, p.T_prime, cfg.dt)
    c = c0.values.astype(complex)
    norm0, energy0 = _norms(mats, c)
    report.record(0.0, norm0, energy0, norm0, tol)

    cached_K, cached_lu, cached_ds = None, None, None
    for k, (s0, ds) in enumerate(steps, start=1):
        s1 = s0 + ds
        K = path_operator(mats, p, s0 + theta * ds, integrate_by_parts)
        if cached_K is None or ds != cached_ds or not np.array_equal(K, cached_K):
            cached_lu = _factor(M + ds * theta * K, k)
            cached_K, cached_ds = K, ds
        previous = norm0 if k == 1 else report.h_norms[-1]
        c = lu_solve(cached_lu, (M - ds * (1.0 - theta) * K) @ c)
        if not np.all(np.isfinite(c)):
            raise LinearSolveError(np.linalg.cond(M + ds * theta * K), step=k)
        h_norm, v_norm = _norms(mats, c)
        if h_norm ** 2 > math.exp(c2_prime * ds) * previous ** 2 * (1.0 + tol):
            report.rejected_steps.append(k)
        report.record(s1, h_norm, v_norm, math.exp(0.5 * c2_prime * s1) * norm0, tol)

    report.final = CoefficientVector(mats.basis, c)
    _log_outcome(report)
    return report


def in_gamma(y: float, omega: float, alpha: float, tau: float, p: PathParams) -> bool:
    """max{|y|, |arctan omega|} < kappa0 min{alpha, T'} and nu0 |tau| < alpha."""
    if not alpha > 0:
        raise HestonError('alpha must be positive', code='invalid_alpha')
    reach = p.kappa0 * min(alpha, p.T_prime)
    return max(abs(y), abs(math.atan(omega))) < reach and p.nu0 * abs(tau) < alpha


def gamma_to_path(y: float, omega: float, alpha: float, tau: float, p: PathParams) -> PathParams:
    """Path parameters whose endpoint at s = alpha is the point (y, omega, alpha, tau) of Gamma."""
    if not in_gamma(y, omega, alpha, tau, p):
        raise PathNotAdmissible('Point lies outside Gamma', bound='Gamma')
    span = min(alpha, p.T_prime)
    return PathParams(
        y0=p.T_prime * y / span,
        omega0=math.tan(p.T_prime * math.atan(omega) / span),
        phi=tau / alpha,
        T_prime=p.T_prime, kappa0=p.kappa0, nu0=p.nu0,
    )


def weak_residual(mats: OperatorMatrices, report: TrajectoryReport,
                  test_path: Callable[[float], Tuple[np.ndarray, np.ndarray]],
                  forcing: Optional[Callable[[float], np.ndarray]] = None) -> float:
    """
    (u(T), phi(T))_H - int (u, phi')_H + int a(u, phi) - (u0, phi(0))_H - int (f, phi)_H
    with trapezoidal time integrals over the recorded steps, relative to ||u0||_H ||phi(0)||_H.
    """
    times = np.asarray(report.times)
    states = report.states
    if states is None or len(states) != times.size:
        raise HestonError('Trajectory was not solved with keep_states', code='trajectory_mismatch')
    integrand = np.empty(times.size, dtype=complex)
    for k, (t, c) in enumerate(zip(times, states)):
        phi, dphi = test_path(float(t))
        value = -np.vdot(dphi, mats.M @ c) + np.vdot(phi, mats.A @ c)
        if forcing is not None:
            value -= np.vdot(phi, mats.M @ forcing(float(t)))
        integrand[k] = value
    phi_end, _ = test_path(float(times[-1]))
    phi_start, _ = test_path(float(times[0]))
    residual = (np.vdot(phi_end, mats.M @ states[-1]) - np.vdot(phi_start, mats.M @ states[0])
                + trapezoid(integrand, times))
    scale = _norms(mats, np.asarray(states[0]))[0] * _norms(mats, np.asarray(phi_start))[0]
    return float(abs(residual) / scale) if scale > 0 else float(abs(residual))


def _log_outcome(report: TrajectoryReport) -> None:
    if report.passed:
        logger.info("%s solve: %d steps, worst relative slack %.3e",
                    report.label, len(report.times) - 1, report.worst_relative_slack)
    else:
        logger.warning("%s solve violated its envelope at %d step(s)", report.label, len(report.violations))
