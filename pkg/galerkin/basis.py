"""
Hermite and Laguerre functions, the tensor basis e_mn, and Galerkin
projection of initial data onto span{e_mn} in the weighted H-product.

e_mn(x, xi) = a^(-1/2) h_m(x/a) * s^(1/2) l_n(s xi), with
h_m(x) = (sqrt(pi) 2^m m!)^(-1/2) H_m(x) exp(-x^2/2) and l_n(xi) = L_n(xi) exp(-xi/2).
The dilations a, s keep the family plain-L2 orthonormal; a = s = 1 gives the
undilated functions.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import DomainError, HestonError, RankDeficiencyError
from .params import WeightParams
from .quadspace import QuadratureGrid, WeightedFunction

logger = logging.getLogger(__name__)


def hermite_functions(m_max: int, x) -> np.ndarray:
    """
    Normalized Hermite functions h_0..h_m_max by the three-term recurrence.

    Args:
        m_max: highest order
        x: real or complex array

    Returns:
        array of shape (m_max + 1,) + x.shape
    """
    x = np.asarray(x)
    dtype = complex if np.iscomplexobj(x) else float
    table = np.empty((m_max + 1,) + x.shape, dtype=dtype)
    table[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if m_max >= 1:
        table[1] = math.sqrt(2.0) * x * table[0]
    for m in range(1, m_max):
        table[m + 1] = math.sqrt(2.0 / (m + 1)) * x * table[m] - math.sqrt(m / (m + 1)) * table[m - 1]
    return table


def hermite_derivatives(m_max: int, x, order: int = 1) -> np.ndarray:
    """h_m' = sqrt(m/2) h_(m-1) - sqrt((m+1)/2) h_(m+1);  h_m'' = (x^2 - 2m - 1) h_m."""
    x = np.asarray(x)
    table = hermite_functions(m_max + 1, x)
    if order == 0:
        return table[:-1]
    if order == 2:
        m = np.arange(m_max + 1).reshape((-1,) + (1,) * x.ndim)
        return (x * x - 2.0 * m - 1.0) * table[:-1]
    out = np.empty_like(table[:-1])
    for m in range(m_max + 1):
        lower = math.sqrt(m / 2.0) * table[m - 1] if m > 0 else 0.0
        out[m] = lower - math.sqrt((m + 1) / 2.0) * table[m + 1]
    return out


def laguerre_functions(n_max: int, xi) -> np.ndarray:
    """l_n(xi) = L_n(xi) exp(-xi/2), n = 0..n_max, by the Laguerre recurrence."""
    xi = np.asarray(xi)
    dtype = complex if np.iscomplexobj(xi) else float
    table = np.empty((n_max + 1,) + xi.shape, dtype=dtype)
    table[0] = np.exp(-0.5 * xi)
    if n_max >= 1:
        table[1] = (1.0 - xi) * table[0]
    for n in range(1, n_max):
        table[n + 1] = ((2 * n + 1 - xi) * table[n] - n * table[n - 1]) / (n + 1)
    return table


def laguerre_derivatives(n_max: int, xi, order: int = 1) -> np.ndarray:
    """l_n' = -sum_{k<n} l_k - l_n/2;  l_n'' = sum_{k<n} (n-k) l_k + l_n/4."""
    table = laguerre_functions(n_max, xi)
    if order == 0:
        return table
    s1 = np.zeros_like(table)
    s1[1:] = np.cumsum(table[:-1], axis=0)
    if order == 1:
        return -s1 - 0.5 * table
    s2 = np.zeros_like(table)
    s2[1:] = np.cumsum(s1[:-1], axis=0)
    return s2 + s1 + 0.25 * table


def suggest_scales(w: WeightParams, m_max: int, n_max: int,
                   x_budget: float = 10.0, xi_budget: float = 18.0) -> Tuple[float, float]:
    """
    Dilations (a, s) so that the span stops where the weight falls below
    exp(-x_budget) in x and exp(-xi_budget) in xi; this bounds the condition
    number of the weighted Gram matrix.
    """
    a = x_budget / (w.gamma * math.sqrt(2.0 * m_max + 1.0))
    s = 4.0 * (n_max + 1) * w.mu / xi_budget
    return float(np.clip(a, 0.5, 4.0)), float(np.clip(s, 1.0, 200.0))


@dataclass(frozen=True)
class TensorBasis:
    m_max: int
    n_max: int
    x_scale: float = 1.0
    xi_scale: float = 1.0

    def __post_init__(self):
        if self.m_max < 0 or self.n_max < 0:
            raise HestonError('Basis orders must be nonnegative', code='order_out_of_range')
        if self.x_scale <= 0 or self.xi_scale <= 0:
            raise HestonError('Basis dilations must be positive', code='invalid_scale')

    @property
    def shape(self) -> Tuple[int, int]:
        return self.m_max + 1, self.n_max + 1

    @property
    def size(self) -> int:
        return (self.m_max + 1) * (self.n_max + 1)

    def index(self, m: int, n: int) -> int:
        self._check_orders(m, n)
        return m * (self.n_max + 1) + n

    def orders(self, j: int) -> Tuple[int, int]:
        if not 0 <= j < self.size:
            raise HestonError(f'Flat index {j} out of range', code='order_out_of_range')
        return divmod(j, self.n_max + 1)

    def _check_orders(self, m: int, n: int) -> None:
        if not (0 <= m <= self.m_max and 0 <= n <= self.n_max):
            raise HestonError(f'Order ({m}, {n}) outside basis {self.m_max}x{self.n_max}',
                              code='order_out_of_range')

    def hermite_table(self, x, derivative: int = 0) -> np.ndarray:
        """Rows m = 0..m_max of d^k/dx^k [a^(-1/2) h_m(x/a)]."""
        a = self.x_scale
        scaled = np.asarray(x) / a
        table = hermite_derivatives(self.m_max, scaled, derivative)
        return table * a ** (-0.5 - derivative)

    def laguerre_table(self, xi, derivative: int = 0) -> np.ndarray:
        """Rows n = 0..n_max of d^k/dxi^k [s^(1/2) l_n(s xi)]."""
        s = self.xi_scale
        table = laguerre_derivatives(self.n_max, s * np.asarray(xi), derivative)
        return table * s ** (0.5 + derivative)

    def eval_basis(self, m: int, n: int, x, xi):
        """Real value of e_mn at (x, xi), xi > 0."""
        self._check_orders(m, n)
        if np.any(np.asarray(xi) <= 0):
            raise DomainError('Real evaluation needs xi > 0')
        value = self.hermite_table(x)[m] * self.laguerre_table(xi)[n]
        return float(value) if np.ndim(value) == 0 else value

    def eval_sum(self, c: 'CoefficientVector', x, xi, dx: int = 0, dxi: int = 0):
        """
        Pointwise sum_mn c_mn d^dx d^dxi e_mn at (x, xi); x and xi broadcast and
        may be complex (x + iy, xi(1 + i omega)).
        """
        x, xi = np.broadcast_arrays(np.asarray(x), np.asarray(xi))
        H = self.hermite_table(x.ravel(), dx)
        L = self.laguerre_table(xi.ravel(), dxi)
        values = np.einsum('mp,mn,np->p', H, c.matrix, L)
        return values.reshape(x.shape) if x.ndim else complex(values[0])

    def eval_mesh(self, c: 'CoefficientVector', x, xi, dx: int = 0, dxi: int = 0) -> np.ndarray:
        """Tensor evaluation on the mesh x (rows) by xi (columns)."""
        H = self.hermite_table(np.asarray(x), dx)
        L = self.laguerre_table(np.asarray(xi), dxi)
        return H.T @ c.matrix @ L


@dataclass
class CoefficientVector:
    basis: TensorBasis
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).ravel()
        if self.values.size != self.basis.size:
            raise HestonError(f'Expected {self.basis.size} coefficients, got {self.values.size}',
                              code='coefficient_size')
        if not np.all(np.isfinite(self.values)):
            raise HestonError('Coefficient vector has non-finite entries', code='non_finite')

    @classmethod
    def zeros(cls, basis: TensorBasis) -> 'CoefficientVector':
        return cls(basis, np.zeros(basis.size, dtype=complex))

    @classmethod
    def unit(cls, basis: TensorBasis, m: int, n: int) -> 'CoefficientVector':
        values = np.zeros(basis.size, dtype=complex)
        values[basis.index(m, n)] = 1.0
        return cls(basis, values)

    @property
    def matrix(self) -> np.ndarray:
        return self.values.reshape(self.basis.shape)

    def __getitem__(self, orders: Tuple[int, int]) -> complex:
        return self.values[self.basis.index(*orders)]

    def norm_M(self, M: np.ndarray) -> float:
        return math.sqrt(max(np.real(np.vdot(self.values, M @ self.values)), 0.0))

    def conj(self) -> 'CoefficientVector':
        return CoefficientVector(self.basis, np.conj(self.values))

    def to_rows(self) -> List[Dict]:
        rows = []
        for j, value in enumerate(self.values):
            m, n = self.basis.orders(j)
            rows.append({'index': j, 'm': m, 'n': n, 're': float(value.real), 'im': float(value.imag)})
        return rows

    @classmethod
    def from_rows(cls, basis: TensorBasis, rows: Iterable[Dict]) -> 'CoefficientVector':
        values = np.zeros(basis.size, dtype=complex)
        seen = set()
        for row in rows:
            j = int(row['index'])
            if basis.orders(j) != (int(row['m']), int(row['n'])) or j in seen:
                raise HestonError(f'Inconsistent coefficient row {row}', code='index_map')
            seen.add(j)
            values[j] = complex(float(row['re']), float(row['im']))
        return cls(basis, values)


@dataclass
class ProjectionResult:
    coefficients: CoefficientVector
    residual: float
    norm_u0: float
    condition: float


def _condition_limit() -> float:
    from django.conf import settings
    return settings.HESTON['GRAM_CONDITION_MAX']


def gram_factors(basis: TensorBasis, grid: QuadratureGrid, w: WeightParams) -> Tuple[np.ndarray, np.ndarray]:
    """One-dimensional Gram factors; the weighted Gram is their Kronecker product."""
    H = basis.hermite_table(grid.x)
    L = basis.laguerre_table(grid.xi)
    Gx = (H * grid.weight_x(w)) @ H.T
    Gxi = (L * grid.weight_xi(w)) @ L.T
    return 0.5 * (Gx + Gx.T), 0.5 * (Gxi + Gxi.T)


def gram_condition(Gx: np.ndarray, Gxi: np.ndarray) -> float:
    ex = np.linalg.eigvalsh(Gx)
    exi = np.linalg.eigvalsh(Gxi)
    if ex[0] <= 0 or exi[0] <= 0:
        return math.inf
    return float((ex[-1] / ex[0]) * (exi[-1] / exi[0]))


def project(u0: WeightedFunction, basis: TensorBasis, grid: QuadratureGrid, w: WeightParams) -> ProjectionResult:
    """
    Least-squares projection of u0 onto span{e_mn} in the H-product.

    Solves G c = b with G = (e_j, e_k)_H and b_j = (u0, e_j)_H; G factorizes as
    G_x (x) G_xi, so both factors are Cholesky-solved separately.

    Args:
        u0: initial data with finite H-norm on the grid
        basis: tensor basis
        grid: weighted quadrature grid
        w: weight parameters

    Returns:
        ProjectionResult with the coefficients and the H-norm residual
    """
    X, XI = grid.mesh()
    U = u0.on_mesh(X, XI)
    H = basis.hermite_table(grid.x)
    L = basis.laguerre_table(grid.xi)
    B = (H * grid.weight_x(w)) @ U @ (L * grid.weight_xi(w)).T

    Gx, Gxi = gram_factors(basis, grid, w)
    condition = gram_condition(Gx, Gxi)
    if condition > _condition_limit():
        raise RankDeficiencyError(condition)
    try:
        fx = cho_factor(Gx)
        fxi = cho_factor(Gxi)
    except LinAlgError:
        raise RankDeficiencyError(condition)
    C = cho_solve(fx, B)
    C = cho_solve(fxi, C.T).T

    coefficients = CoefficientVector(basis, C)
    reconstruction = H.T @ C @ L
    measure = grid.measure(w)
    residual = math.sqrt(float(np.sum(np.abs(U - reconstruction) ** 2 * measure)))
    norm_u0 = math.sqrt(float(np.sum(np.abs(U) ** 2 * measure)))
    logger.debug("Projected %s onto %dx%d basis: residual %.3e (cond %.2e)",
                 u0.name or 'u0', basis.m_max + 1, basis.n_max + 1, residual, condition)
    return ProjectionResult(coefficients=coefficients, residual=residual, norm_u0=norm_u0, condition=condition)


def decay_constant(c: CoefficientVector, r: float, vartheta: float,
                   x_extent: float = 8.0, xi_extent: float = 40.0, samples: int = 41) -> Dict[str, float]:
    """
    Coarse maximization of |sum c e(x+iy, xi(1+i omega))| exp(((x/a)^2 + s xi)/4)
    over |y| <= r and |arctan omega| <= vartheta.

    Returns:
        {'A': constant, 'x', 'y', 'xi', 'omega': location of the maximum}
    """
    basis = c.basis
    a, s = basis.x_scale, basis.xi_scale
    xs = np.linspace(-x_extent * a, x_extent * a, samples)
    xis = np.linspace(xi_extent / (s * samples), xi_extent / s, samples)
    ys = np.linspace(-r, r, 5)
    omegas = np.tan(np.linspace(-vartheta, vartheta, 5))
    best = {'A': 0.0, 'x': 0.0, 'y': 0.0, 'xi': 0.0, 'omega': 0.0}
    for y in ys:
        for omega in omegas:
            values = basis.eval_mesh(c, xs + 1j * y, xis * (1.0 + 1j * omega))
            scaled = np.abs(values) * np.exp(((xs[:, None] / a) ** 2 + s * xis[None, :]) / 4.0)
            i, k = np.unravel_index(np.argmax(scaled), scaled.shape)
            if scaled[i, k] > best['A']:
                best = {'A': float(scaled[i, k]), 'x': float(xs[i]), 'y': float(y),
                        'xi': float(xis[k]), 'omega': float(omega)}
    return best
