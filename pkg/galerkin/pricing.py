"""
Payoffs, price surfaces in original variables, and the market-completeness
diagnostic built on d u / d xi.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .basis import CoefficientVector, ProjectionResult, TensorBasis, project
from .exceptions import HestonError, ParameterMismatchError, PayoffNotAdmissible
from .params import ModelParams, WeightParams, transform
from .quadspace import QuadratureGrid, WeightedFunction, composite_gauss_legendre

logger = logging.getLogger(__name__)

PAYOFF_KINDS = ('call', 'put', 'custom')


@dataclass(frozen=True)
class Payoff:
    """h(x) with x = log(S/K); custom payoffs supply func(x)."""
    kind: str
    K: float
    func: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in PAYOFF_KINDS:
            raise HestonError(f"Unknown payoff kind '{self.kind}'", code='invalid_payoff')
        if self.kind == 'custom' and self.func is None:
            raise HestonError('Custom payoffs need a function of x', code='invalid_payoff')
        if not self.K > 0:
            raise HestonError('Strike must be positive', code='invalid_payoff')

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == 'call':
            return self.K * np.maximum(np.exp(x) - 1.0, 0.0)
        if self.kind == 'put':
            return self.K * np.maximum(1.0 - np.exp(x), 0.0)
        return np.asarray(self.func(x), dtype=float)

    def of_spot(self, S):
        """Payoff as a function of the terminal spot."""
        return self(np.log(np.asarray(S, dtype=float) / self.K))

    def check_membership(self, gamma: float, x_max: float = 200.0, panels: int = 64) -> Dict:
        """
        Finite ||h||_H under the x-weight exp(-gamma|x|). Calls need gamma > 2;
        custom payoffs are integrated and their outermost panels must carry
        less than 1e-10 of the mass.
        """
        if self.kind == 'call':
            ok = gamma > 2.0
            result = {'kind': self.kind, 'gamma': gamma, 'finite': ok, 'tailFraction': None}
        elif self.kind == 'put':
            result = {'kind': self.kind, 'gamma': gamma, 'finite': gamma > 0, 'tailFraction': None}
        else:
            breaks = np.linspace(-x_max, x_max, 2 * panels + 1)
            x, wx = composite_gauss_legendre(breaks, 16)
            values = np.abs(self(x)) ** 2 * np.exp(-gamma * np.abs(x)) * wx
            total = float(np.sum(values))
            per_panel = values.reshape(2 * panels, 16).sum(axis=1)
            tail = float(per_panel[0] + per_panel[-1])
            finite = bool(np.isfinite(total)) and (total == 0 or tail < 1e-10 * total)
            result = {'kind': self.kind, 'gamma': gamma, 'finite': finite,
                      'tailFraction': tail / total if total > 0 else 0.0}
        if not result['finite']:
            raise PayoffNotAdmissible(
                f"{self.kind} payoff is not in H for gamma = {gamma:g}"
                + (' (calls need gamma > 2)' if self.kind == 'call' else ''),
                gamma=gamma,
            )
        return result

    def as_function(self) -> WeightedFunction:
        return WeightedFunction(values=lambda X, XI: self(X) + 0.0 * XI, name=f'{self.kind} payoff')


def project_payoff(payoff: Payoff, basis: TensorBasis, grid: QuadratureGrid, w: WeightParams) -> ProjectionResult:
    payoff.check_membership(w.gamma)
    return project(payoff.as_function(), basis, grid, w)


@dataclass(frozen=True, eq=False)
class SolvedState:
    """Coefficients of u(., ., tau) for the model they were solved with."""
    coefficients: CoefficientVector
    model: ModelParams
    tau: float
    kind: str = 'put'


@dataclass(eq=False)
class PriceSurface:
    x: np.ndarray
    v: np.ndarray
    u: np.ndarray
    p: np.ndarray
    du_dxi: np.ndarray
    tau: float
    K: float
    sigma: float
    discount: float = 1.0
    kind: str = ''

    def __post_init__(self):
        shape = (self.x.size, self.v.size)
        for name in ('u', 'p', 'du_dxi'):
            values = getattr(self, name)
            if values.shape != shape:
                raise HestonError(f'{name} has shape {values.shape}, expected {shape}', code='surface_shape')
            if not np.all(np.isfinite(values)):
                raise HestonError(f'{name} has non-finite values', code='non_finite')

    @property
    def S(self) -> np.ndarray:
        return self.K * np.exp(self.x)

    @property
    def xi(self) -> np.ndarray:
        return self.v / self.sigma

    def flags(self, tol: float = 1e-8) -> List[Dict]:
        """Negative prices beyond tol K are flagged, not fatal."""
        lowest = float(self.p.min())
        if lowest < -tol * self.K:
            return [{'rule': 'NEGATIVE_PRICE',
                     'description': f"min price {lowest:.3e} below -{tol:g} K at tau = {self.tau:g}",
                     'severity': 'warning'}]
        return []

    def to_rows(self) -> List[Dict]:
        rows = []
        S = self.S
        for i, x in enumerate(self.x):
            for k, v in enumerate(self.v):
                rows.append({'x': float(x), 'v': float(v), 'S': float(S[i]),
                             'p': float(self.p[i, k]), 'du_dxi': float(self.du_dxi[i, k])})
        return rows


def interior_axes(m: ModelParams, cells: int = 60, x_band: float = 1.5):
    """x in [-1.5, 1.5] and xi in [0.1 theta_sigma, 4 theta_sigma] with cells + 1 nodes each."""
    t = transform(m)
    x = np.linspace(-x_band, x_band, cells + 1)
    xi = np.linspace(0.1 * t.theta_sigma, 4.0 * t.theta_sigma, cells + 1)
    return x, xi


def price_surface(state: SolvedState, m: ModelParams, x: Optional[Sequence[float]] = None,
                  v: Optional[Sequence[float]] = None) -> PriceSurface:
    """
    p(x, v, tau) = exp(-r tau) u(x, v/sigma, tau), S = K e^x.

    Args:
        state: solved coefficients with the model they belong to
        m: model parameters of the request
        x, v: evaluation axes; default to the interior band

    Returns:
        PriceSurface with d u / d xi from the analytic basis derivative
    """
    if state.model != m:
        raise ParameterMismatchError('State was solved with different model parameters')
    x_axis, xi_axis = interior_axes(m)
    x_axis = x_axis if x is None else np.asarray(x, dtype=float)
    v_axis = xi_axis * m.sigma if v is None else np.asarray(v, dtype=float)
    if np.any(v_axis <= 0):
        raise HestonError('Variances must be positive', code='invalid_axis')
    xi_axis = v_axis / m.sigma

    basis = state.coefficients.basis
    u = basis.eval_mesh(state.coefficients, x_axis, xi_axis)
    du = basis.eval_mesh(state.coefficients, x_axis, xi_axis, dxi=1)
    discount = math.exp(-m.r * state.tau)
    return PriceSurface(
        x=x_axis, v=v_axis, u=u.real, p=discount * u.real, du_dxi=du.real,
        tau=state.tau, K=m.K, sigma=m.sigma, discount=discount, kind=state.kind,
    )


def price_at(state: SolvedState, m: ModelParams, S0: float, v0: float) -> float:
    surface = price_surface(state, m, x=[math.log(S0 / m.K)], v=[v0])
    return float(surface.p[0, 0])


def vega_from_surface(surface: PriceSurface) -> np.ndarray:
    """d p / d v = exp(-r tau) sigma^-1 d u / d xi."""
    return surface.discount * surface.du_dxi / surface.sigma


def parity_gap(call: PriceSurface, put: PriceSurface, m: ModelParams) -> float:
    """max |C - P - (S e^(-q tau) - K e^(-r tau))| over the common grid."""
    if call.tau != put.tau or call.x.shape != put.x.shape or not np.allclose(call.x, put.x):
        raise ParameterMismatchError('Call and put surfaces live on different grids')
    forward = call.S[:, None] * math.exp(-m.q * call.tau) - m.K * math.exp(-m.r * call.tau)
    return float(np.max(np.abs(call.p - put.p - forward)))


@dataclass
class CompletenessEntry:
    tau: float
    min_du_dxi: float
    min_abs_du_dxi: float
    positive_fraction: float
    negative_fraction: float
    unresolved_fraction: float
    zero_set_fraction: float
    degenerate: bool
    passed: bool


@dataclass
class CompletenessReport:
    entries: List[CompletenessEntry] = field(default_factory=list)
    tolerance: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.entries) and all(entry.passed for entry in self.entries)

    @property
    def violations(self) -> List[Dict]:
        return [
            {'rule': 'DEGENERATE' if e.degenerate else 'ZERO_SET',
             'description': f"tau = {e.tau:g}: zero-set fraction {e.zero_set_fraction:.4f}, min du/dxi {e.min_du_dxi:.3e}",
             'severity': 'critical'}
            for e in self.entries if not e.passed
        ]


def completeness_entry(surface: PriceSurface, tolerance: float = 0.0, floor: float = 1e-6) -> CompletenessEntry:
    """
    Sign map of d u / d xi on the surface nodes. Values below floor * max |du/dxi|
    are unresolved; a cell counts toward the zero set when its resolved corners
    disagree in sign.
    """
    du = surface.du_dxi
    scale = float(np.max(np.abs(du)))
    degenerate = scale <= 1e-10 * max(1.0, float(np.max(np.abs(surface.u))))
    resolved = np.abs(du) > floor * scale if scale > 0 else np.zeros(du.shape, dtype=bool)
    signs = np.sign(du) * resolved

    corners = np.stack([signs[:-1, :-1], signs[1:, :-1], signs[:-1, 1:], signs[1:, 1:]])
    cell_resolved = np.all(corners != 0, axis=0)
    changes = cell_resolved & (corners.max(axis=0) != corners.min(axis=0))
    resolved_cells = int(cell_resolved.sum())
    zero_fraction = float(changes.sum()) / resolved_cells if resolved_cells else 1.0

    total = du.size
    values = du[resolved] if resolved.any() else du.ravel()
    entry = CompletenessEntry(
        tau=surface.tau,
        min_du_dxi=float(values.min()),
        min_abs_du_dxi=float(np.min(np.abs(du))),
        positive_fraction=float(np.sum(signs > 0)) / total,
        negative_fraction=float(np.sum(signs < 0)) / total,
        unresolved_fraction=float(np.sum(~resolved)) / total,
        zero_set_fraction=zero_fraction,
        degenerate=bool(degenerate),
        passed=bool(not degenerate and zero_fraction <= tolerance),
    )
    return entry


def completeness_report(surfaces: Sequence[PriceSurface], tolerance: float = 0.0, floor: float = 1e-6) -> CompletenessReport:
    """Completeness diagnostic for a sequence of surfaces over time."""
    report = CompletenessReport(tolerance=tolerance)
    for surface in surfaces:
        report.entries.append(completeness_entry(surface, tolerance, floor))
    if report.passed:
        logger.info("Completeness: %d surfaces, no zero set above tolerance", len(surfaces))
    else:
        logger.warning("Completeness flagged %d of %d surfaces", len(report.violations), len(surfaces))
    return report
