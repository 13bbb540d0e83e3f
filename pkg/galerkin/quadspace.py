"""
Weighted quadrature over the half-plane R x (0, inf) for the measure
w(x, xi) dx dxi = xi^(beta-1) exp(-gamma|x| - mu xi) dx dxi, the H- and
V-inner products, and numerical checkers for the trace, Sobolev and Hardy
inequalities of the weighted space.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammainccinv

from .exceptions import DomainError, HestonError
from .params import WeightParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    points_per_panel: int = 24
    x_panels: int = 8
    x_tail_panels: int = 4
    xi_panels: int = 12
    xi_grading: float = 0.5
    tail_mass: float = 1e-12
    x_core: Optional[float] = None
    xi_core: Optional[float] = None

    @classmethod
    def from_settings(cls, **overrides) -> 'GridSpec':
        from django.conf import settings
        defaults = settings.HESTON
        spec = cls(
            points_per_panel=defaults['POINTS_PER_PANEL'],
            x_panels=defaults['X_PANELS'],
            x_tail_panels=defaults['X_TAIL_PANELS'],
            xi_panels=defaults['XI_PANELS'],
            xi_grading=defaults['XI_GRADING'],
            tail_mass=defaults['TAIL_MASS'],
        )
        overrides = {key: value for key, value in overrides.items() if value is not None}
        return replace(spec, **overrides)

    def for_orders(self, m_max: int, n_max: int, x_scale: float = 1.0, xi_scale: float = 1.0) -> 'GridSpec':
        """Core regions and panel counts sized to resolve a tensor basis of the given orders."""
        return replace(
            self,
            x_core=x_scale * (math.sqrt(2.0 * m_max + 1.0) + 6.0),
            xi_core=(4.0 * (n_max + 1) + 12.0) / xi_scale,
            x_panels=max(self.x_panels, (m_max + 1) // 4),
            xi_panels=max(self.xi_panels, (n_max + 1) // 3),
        )

    def refined(self, factor: int = 2) -> 'GridSpec':
        return replace(
            self,
            x_panels=self.x_panels * factor,
            x_tail_panels=self.x_tail_panels * factor,
            xi_panels=self.xi_panels * factor,
        )


def composite_gauss_legendre(breaks: Sequence[float], n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre rule with n points on every panel [breaks[i], breaks[i+1]].

    Returns:
        (nodes, weights), nodes strictly inside the panels
    """
    y, wy = leggauss(n)
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1], breaks[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * y[None, :]
    weights = half[:, None] * wy[None, :]
    return nodes.ravel(), weights.ravel()


def truncation_bounds(w: WeightParams, tail_mass: float) -> Tuple[float, float]:
    """X_max and Xi_max such that the weight mass beyond each is below tail_mass of the total."""
    x_max = -math.log(tail_mass) / w.gamma
    xi_max = float(gammainccinv(w.beta, tail_mass)) / w.mu
    return x_max, xi_max


def _x_breaks(spec: GridSpec, x_max: float) -> np.ndarray:
    core = spec.x_core
    if core is None or core >= x_max:
        return np.linspace(0.0, x_max, spec.x_panels + 1)
    inner = np.linspace(0.0, core, spec.x_panels + 1)
    tail = core * (x_max / core) ** (np.arange(1, spec.x_tail_panels + 1) / spec.x_tail_panels)
    return np.concatenate([inner, tail])


def _xi_breaks(spec: GridSpec, xi_max: float) -> np.ndarray:
    core = xi_max if spec.xi_core is None else min(spec.xi_core, xi_max)
    graded = core * spec.xi_grading ** np.arange(spec.xi_panels - 1, -1, -1)
    breaks = np.concatenate([[0.0], graded])
    if core < xi_max:
        tail = core * (xi_max / core) ** (np.arange(1, spec.x_tail_panels + 1) / spec.x_tail_panels)
        breaks = np.concatenate([breaks, tail])
    return breaks


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    x: np.ndarray
    wx: np.ndarray
    xi: np.ndarray
    wxi: np.ndarray
    x_max: float
    xi_max: float
    x_breaks: np.ndarray
    xi_breaks: np.ndarray
    spec: GridSpec

    @property
    def shape(self) -> Tuple[int, int]:
        return self.x.size, self.xi.size

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.xi, indexing='ij')

    def weight_x(self, w: WeightParams) -> np.ndarray:
        """Quadrature weights times exp(-gamma|x|)."""
        return self.wx * np.exp(-w.gamma * np.abs(self.x))

    def weight_xi(self, w: WeightParams, power: float = 0.0) -> np.ndarray:
        """Quadrature weights times xi^(beta - 1 + power) exp(-mu xi)."""
        return self.wxi * self.xi ** (w.beta - 1.0 + power) * np.exp(-w.mu * self.xi)

    def measure(self, w: WeightParams, power: float = 0.0) -> np.ndarray:
        return np.outer(self.weight_x(w), self.weight_xi(w, power))


def build_grid(w: WeightParams, spec: Optional[GridSpec] = None) -> QuadratureGrid:
    """
    Composite Gauss-Legendre grid split at x = 0 and graded toward xi = 0.

    Args:
        w: weight parameters (fix the truncation bounds)
        spec: panel layout; defaults from settings

    Returns:
        QuadratureGrid
    """
    spec = spec or GridSpec.from_settings()
    x_max, xi_max = truncation_bounds(w, spec.tail_mass)

    half_breaks = _x_breaks(spec, x_max)
    xp, wxp = composite_gauss_legendre(half_breaks, spec.points_per_panel)
    x = np.concatenate([-xp[::-1], xp])
    wx = np.concatenate([wxp[::-1], wxp])

    xi_breaks = _xi_breaks(spec, xi_max)
    xi, wxi = composite_gauss_legendre(xi_breaks, spec.points_per_panel)

    logger.debug("Grid built: %d x-nodes on [-%.3g, %.3g], %d xi-nodes on (0, %.3g]",
                 x.size, x_max, x_max, xi.size, xi_max)
    return QuadratureGrid(
        x=x, wx=wx, xi=xi, wxi=wxi,
        x_max=x_max, xi_max=xi_max,
        x_breaks=np.concatenate([-half_breaks[::-1], half_breaks[1:]]),
        xi_breaks=xi_breaks, spec=spec,
    )


def weight_eval(x, xi, w: WeightParams):
    """xi^(beta-1) exp(-gamma|x| - mu xi); raises DomainError for xi <= 0."""
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr <= 0):
        raise DomainError('Weight is only defined for xi > 0')
    value = xi_arr ** (w.beta - 1.0) * np.exp(-w.gamma * np.abs(np.asarray(x, dtype=float)) - w.mu * xi_arr)
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class WeightedFunction:
    """A complex function on the half-plane with optional analytic partials."""
    values: Callable
    dx: Optional[Callable] = None
    dxi: Optional[Callable] = None
    name: str = ''

    @classmethod
    def constant(cls, c: complex = 1.0) -> 'WeightedFunction':
        zero = lambda x, xi: np.zeros(np.broadcast(x, xi).shape)
        return cls(
            values=lambda x, xi: np.full(np.broadcast(x, xi).shape, c, dtype=complex),
            dx=zero, dxi=zero, name=f'constant({c})',
        )

    @property
    def has_partials(self) -> bool:
        return self.dx is not None and self.dxi is not None

    @staticmethod
    def _evaluate(func: Callable, X: np.ndarray, XI: np.ndarray, label: str) -> np.ndarray:
        values = np.broadcast_to(np.asarray(func(X, XI), dtype=complex), X.shape)
        if not np.all(np.isfinite(values)):
            raise DomainError(f'{label} is not finite at every grid node')
        return values

    def on_mesh(self, X: np.ndarray, XI: np.ndarray) -> np.ndarray:
        return self._evaluate(self.values, X, XI, self.name or 'function')

    def partials_on_mesh(self, X: np.ndarray, XI: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if not self.has_partials:
            raise HestonError(f'{self.name or "function"} has no analytic partials', code='missing_partials')
        return (self._evaluate(self.dx, X, XI, 'u_x'),
                self._evaluate(self.dxi, X, XI, 'u_xi'))


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    passed: bool
    constants: Dict[str, float] = field(default_factory=dict)
    tol: float = 0.0
    L0: Optional[float] = None
    L_infinity: Optional[float] = None
    L_x: Optional[float] = None


def _tol_rel() -> float:
    from django.conf import settings
    return settings.HESTON['TOL_REL']


def inner_H(u: WeightedFunction, v: WeightedFunction, grid: QuadratureGrid, w: WeightParams) -> complex:
    """(u, v)_H = int u conj(v) w dx dxi by quadrature."""
    X, XI = grid.mesh()
    U = u.on_mesh(X, XI)
    V = v.on_mesh(X, XI)
    return complex(np.sum(U * np.conj(V) * grid.measure(w)))


def inner_V(u: WeightedFunction, v: WeightedFunction, grid: QuadratureGrid, w: WeightParams) -> complex:
    """(u, v)_V = int (u_x conj v_x + u_xi conj v_xi) xi w + (u, v)_H."""
    X, XI = grid.mesh()
    Ux, Uxi = u.partials_on_mesh(X, XI)
    Vx, Vxi = v.partials_on_mesh(X, XI)
    gradient = np.sum((Ux * np.conj(Vx) + Uxi * np.conj(Vxi)) * grid.measure(w, power=1.0))
    return complex(gradient) + inner_H(u, v, grid, w)


def norm_H(u: WeightedFunction, grid: QuadratureGrid, w: WeightParams) -> float:
    return math.sqrt(max(inner_H(u, u, grid, w).real, 0.0))


def norm_V(u: WeightedFunction, grid: QuadratureGrid, w: WeightParams) -> float:
    return math.sqrt(max(inner_V(u, u, grid, w).real, 0.0))


def _xi_integrals(u: WeightedFunction, grid: QuadratureGrid, w: WeightParams) -> Dict[str, float]:
    """Integrals against exp(-gamma|x| - mu xi) times powers of xi."""
    X, XI = grid.mesh()
    U2 = np.abs(u.on_mesh(X, XI)) ** 2
    out = {
        'u2_beta_minus_2': float(np.sum(U2 * grid.measure(w, power=-1.0))),
        'u2_beta_minus_1': float(np.sum(U2 * grid.measure(w))),
        'u2_beta': float(np.sum(U2 * grid.measure(w, power=1.0))),
    }
    if u.dxi is not None:
        Uxi2 = np.abs(WeightedFunction._evaluate(u.dxi, X, XI, 'u_xi')) ** 2
        out['uxi2_beta'] = float(np.sum(Uxi2 * grid.measure(w, power=1.0)))
    return out


def check_hardy(u: WeightedFunction, grid: QuadratureGrid, w: WeightParams) -> InequalityReport:
    """
    int |u/xi|^2 xi^beta e <= 8/(beta-1)^2 int |u_xi|^2 xi^beta e + 2 mu^2/(beta-1)^2 int |u|^2 xi^beta e,
    with e = exp(-gamma|x| - mu xi).
    """
    if w.beta <= 1.0:
        raise DomainError('Hardy inequality requires beta > 1')
    if u.dxi is None:
        raise HestonError('Hardy check needs the analytic partial u_xi', code='missing_partials')
    tol = _tol_rel()
    moments = _xi_integrals(u, grid, w)
    h1 = 8.0 / (w.beta - 1.0) ** 2
    h2 = 2.0 * w.mu ** 2 / (w.beta - 1.0) ** 2
    lhs = moments['u2_beta_minus_2']
    rhs = h1 * moments['uxi2_beta'] + h2 * moments['u2_beta']
    return InequalityReport(
        name='hardy', lhs=lhs, rhs=rhs, passed=lhs <= rhs * (1.0 + tol),
        constants={'gradient': h1, 'mass': h2}, tol=tol,
    )


def check_sobolev(u: WeightedFunction, grid: QuadratureGrid, w: WeightParams) -> InequalityReport:
    """int |u|^2 xi^beta e <= (2/mu)^2 int |u_xi|^2 xi^beta e + (2 beta/mu) int |u|^2 xi^(beta-1) e."""
    if u.dxi is None:
        raise HestonError('Sobolev check needs the analytic partial u_xi', code='missing_partials')
    tol = _tol_rel()
    moments = _xi_integrals(u, grid, w)
    s1 = (2.0 / w.mu) ** 2
    s2 = 2.0 * w.beta / w.mu
    lhs = moments['u2_beta']
    rhs = s1 * moments['uxi2_beta'] + s2 * moments['u2_beta_minus_1']
    return InequalityReport(
        name='sobolev', lhs=lhs, rhs=rhs, passed=lhs <= rhs * (1.0 + tol),
        constants={'gradient': s1, 'mass': s2}, tol=tol,
    )


def extrapolate_to_zero(t: Sequence[float], f: Sequence[float]) -> float:
    """Lagrange (Neville) extrapolation of f(t) to t = 0 through the given probes."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    total = 0.0
    for i in range(t.size):
        others = np.delete(t, i)
        total += f[i] * np.prod(others / (others - t[i]))
    return float(total)


def check_traces(u: WeightedFunction, grid: QuadratureGrid, w: WeightParams) -> InequalityReport:
    """
    Zero boundary limits of the weighted space:
    xi^beta int |u|^2 e^{-gamma|x|} dx -> 0 as xi -> 0+ and (times e^{-mu xi}) as xi -> inf,
    e^{-gamma|x|} int |u|^2 xi^beta e^{-mu xi} dxi -> 0 as x -> +-inf.
    """
    from django.conf import settings
    norm2 = norm_H(u, grid, w) ** 2
    tol_abs = settings.HESTON['TOL_TRACE'] * max(norm2, np.finfo(float).tiny)
    wx = grid.weight_x(w)

    def x_section(xi_value: float) -> float:
        values = u.on_mesh(grid.x, np.full_like(grid.x, xi_value))
        return float(np.sum(np.abs(values) ** 2 * wx))

    # each limit: three geometric probes from the outermost panel outward (below the
    # first xi break, from xi_max and from x_max), Neville-extrapolated to the boundary
    first = grid.xi_breaks[1]
    small = first * np.array([1e-2, 1e-3, 1e-4])
    L0 = extrapolate_to_zero(small, [s ** w.beta * x_section(s) for s in small])

    large = grid.xi_max * np.array([1.0, 2.0, 4.0])
    L_inf = extrapolate_to_zero(
        1.0 / large,
        [s ** w.beta * math.exp(-w.mu * s) * x_section(s) for s in large],
    )

    wxi = grid.wxi * grid.xi ** w.beta * np.exp(-w.mu * grid.xi)

    def xi_section(x_value: float) -> float:
        values = u.on_mesh(np.full_like(grid.xi, x_value), grid.xi)
        return math.exp(-w.gamma * abs(x_value)) * float(np.sum(np.abs(values) ** 2 * wxi))

    far = grid.x_max * np.array([1.0, 2.0, 4.0])
    L_x = max(
        abs(extrapolate_to_zero(1.0 / far, [xi_section(s) for s in far])),
        abs(extrapolate_to_zero(1.0 / far, [xi_section(-s) for s in far])),
    )

    L0, L_inf = abs(L0), abs(L_inf)
    worst = max(L0, L_inf, L_x)
    return InequalityReport(
        name='traces', lhs=worst, rhs=tol_abs,
        passed=L0 < tol_abs and L_inf < tol_abs and L_x < tol_abs,
        constants={'tolAbs': tol_abs}, tol=0.0,
        L0=L0, L_infinity=L_inf, L_x=L_x,
    )


def check_pointwise_trace(u: WeightedFunction, x: float, grid: QuadratureGrid, w: WeightParams) -> InequalityReport:
    """
    d/dxi (xi^beta e^{-mu xi} |u|^2) <= mu^-1 |u_xi|^2 xi^beta e^{-mu xi} + beta |u|^2 xi^(beta-1) e^{-mu xi}
    at every xi-node for the fixed x; reports the worst node.
    """
    if u.dxi is None:
        raise HestonError('Pointwise trace check needs u_xi', code='missing_partials')
    tol = _tol_rel()
    xi = grid.xi
    X = np.full_like(xi, x)
    U = u.on_mesh(X, xi)
    Uxi = WeightedFunction._evaluate(u.dxi, X, xi, 'u_xi')
    decay = np.exp(-w.mu * xi)
    lhs = (2.0 * np.real(Uxi * np.conj(U)) * xi ** w.beta
           + w.beta * np.abs(U) ** 2 * xi ** (w.beta - 1.0)
           - w.mu * np.abs(U) ** 2 * xi ** w.beta) * decay
    rhs = (np.abs(Uxi) ** 2 * xi ** w.beta / w.mu + w.beta * np.abs(U) ** 2 * xi ** (w.beta - 1.0)) * decay
    lhs_pos = np.maximum(lhs, 0.0)
    worst = int(np.argmax(lhs_pos - rhs * (1.0 + tol)))
    return InequalityReport(
        name='pointwise_trace', lhs=float(lhs_pos[worst]), rhs=float(rhs[worst]),
        passed=bool(np.all(lhs_pos <= rhs * (1.0 + tol) + np.finfo(float).eps * np.max(rhs))),
        constants={'x': x, 'xi': float(xi[worst])}, tol=tol,
    )


def equivalent_norm_constant(w: WeightParams) -> float:
    """Upper constant of ||u||_V# <= C ||u||_V from the Sobolev bound chained into the Hardy bound."""
    s1 = (2.0 / w.mu) ** 2
    s2 = 2.0 * w.beta / w.mu
    h1 = 8.0 / (w.beta - 1.0) ** 2
    h2 = 2.0 * w.mu ** 2 / (w.beta - 1.0) ** 2
    return 1.0 + max(s1 + h1 + h2 * s1, s2 + h2 * s2)


def norm_V_sharp(u: WeightedFunction, grid: QuadratureGrid, w: WeightParams) -> float:
    """||u||_V^2 plus int |u|^2 (xi + 1/xi) w, square-rooted."""
    moments = _xi_integrals(u, grid, w)
    extra = moments['u2_beta'] + moments['u2_beta_minus_2']
    return math.sqrt(norm_V(u, grid, w) ** 2 + extra)


def check_equivalent_norm(u: WeightedFunction, grid: QuadratureGrid, w: WeightParams) -> InequalityReport:
    tol = _tol_rel()
    v2 = norm_V(u, grid, w) ** 2
    sharp2 = norm_V_sharp(u, grid, w) ** 2
    c_eq = equivalent_norm_constant(w)
    return InequalityReport(
        name='equivalent_norm', lhs=sharp2, rhs=c_eq * v2,
        passed=(v2 <= sharp2 * (1.0 + tol)) and (sharp2 <= c_eq * v2 * (1.0 + tol)),
        constants={'cEq': c_eq, 'normV2': v2}, tol=tol,
    )


def inequality_suite(u: WeightedFunction, grid: QuadratureGrid, w: WeightParams) -> Dict[str, InequalityReport]:
    """All weighted-space inequality checks for one function."""
    return {
        'hardy': check_hardy(u, grid, w),
        'sobolev': check_sobolev(u, grid, w),
        'traces': check_traces(u, grid, w),
        'pointwiseTrace': check_pointwise_trace(u, 0.0, grid, w),
        'equivalentNorm': check_equivalent_norm(u, grid, w),
    }


def inequality_family() -> Sequence[WeightedFunction]:
    """
    Twenty smooth V-finite functions (polynomials x Gaussians x exponentials)
    with analytic partials.
    """
    family = []

    def add(name, f, fx, fxi):
        family.append(WeightedFunction(values=f, dx=fx, dxi=fxi, name=name))

    add('exp(-|x|-xi)',
        lambda x, xi: np.exp(-np.abs(x) - xi),
        lambda x, xi: -np.sign(x) * np.exp(-np.abs(x) - xi),
        lambda x, xi: -np.exp(-np.abs(x) - xi))
    add('1',
        lambda x, xi: np.ones(np.broadcast(x, xi).shape),
        lambda x, xi: np.zeros(np.broadcast(x, xi).shape),
        lambda x, xi: np.zeros(np.broadcast(x, xi).shape))
    for a in (0.5, 1.0, 2.0):
        for b in (0.0, 1.0):
            add(f'exp(-{a}x^2-{b}xi)',
                lambda x, xi, a=a, b=b: np.exp(-a * x ** 2 - b * xi),
                lambda x, xi, a=a, b=b: -2 * a * x * np.exp(-a * x ** 2 - b * xi),
                lambda x, xi, a=a, b=b: -b * np.exp(-a * x ** 2 - b * xi))
    for k in (1, 2, 3):
        add(f'xi^{k} exp(-x^2-xi)',
            lambda x, xi, k=k: xi ** k * np.exp(-x ** 2 - xi),
            lambda x, xi, k=k: -2 * x * xi ** k * np.exp(-x ** 2 - xi),
            lambda x, xi, k=k: (k * xi ** (k - 1) - xi ** k) * np.exp(-x ** 2 - xi))
    for k in (1, 2):
        add(f'x^{k} exp(-x^2/2) exp(-xi/2)',
            lambda x, xi, k=k: x ** k * np.exp(-x ** 2 / 2 - xi / 2),
            lambda x, xi, k=k: (k * x ** (k - 1) - x ** (k + 1)) * np.exp(-x ** 2 / 2 - xi / 2),
            lambda x, xi, k=k: -0.5 * x ** k * np.exp(-x ** 2 / 2 - xi / 2))
    add('(1 + x xi) exp(-x^2-xi)',
        lambda x, xi: (1 + x * xi) * np.exp(-x ** 2 - xi),
        lambda x, xi: (xi - 2 * x * (1 + x * xi)) * np.exp(-x ** 2 - xi),
        lambda x, xi: (x - (1 + x * xi)) * np.exp(-x ** 2 - xi))
    add('exp(-|x|) (1 - xi) exp(-2 xi)',
        lambda x, xi: np.exp(-np.abs(x)) * (1 - xi) * np.exp(-2 * xi),
        lambda x, xi: -np.sign(x) * np.exp(-np.abs(x)) * (1 - xi) * np.exp(-2 * xi),
        lambda x, xi: np.exp(-np.abs(x)) * (2 * xi - 3) * np.exp(-2 * xi))
    add('exp(-x^2) exp(i xi) exp(-xi)',
        lambda x, xi: np.exp(-x ** 2 + (1j - 1) * xi),
        lambda x, xi: -2 * x * np.exp(-x ** 2 + (1j - 1) * xi),
        lambda x, xi: (1j - 1) * np.exp(-x ** 2 + (1j - 1) * xi))
    add('exp(-(x-1)^2) xi exp(-xi/2)',
        lambda x, xi: np.exp(-(x - 1) ** 2) * xi * np.exp(-xi / 2),
        lambda x, xi: -2 * (x - 1) * np.exp(-(x - 1) ** 2) * xi * np.exp(-xi / 2),
        lambda x, xi: np.exp(-(x - 1) ** 2) * (1 - xi / 2) * np.exp(-xi / 2))
    add('cos(x) exp(-x^2) exp(-xi)',
        lambda x, xi: np.cos(x) * np.exp(-x ** 2 - xi),
        lambda x, xi: (-np.sin(x) - 2 * x * np.cos(x)) * np.exp(-x ** 2 - xi),
        lambda x, xi: -np.cos(x) * np.exp(-x ** 2 - xi))
    add('xi exp(-|x|-xi)',
        lambda x, xi: xi * np.exp(-np.abs(x) - xi),
        lambda x, xi: -np.sign(x) * xi * np.exp(-np.abs(x) - xi),
        lambda x, xi: (1 - xi) * np.exp(-np.abs(x) - xi))
    add('(x^2 + xi^2) exp(-x^2 - 3 xi)',
        lambda x, xi: (x ** 2 + xi ** 2) * np.exp(-x ** 2 - 3 * xi),
        lambda x, xi: (2 * x - 2 * x * (x ** 2 + xi ** 2)) * np.exp(-x ** 2 - 3 * xi),
        lambda x, xi: (2 * xi - 3 * (x ** 2 + xi ** 2)) * np.exp(-x ** 2 - 3 * xi))
    return family
