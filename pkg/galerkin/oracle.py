"""
Reference prices: full-truncation Monte Carlo of the Heston SDEs, the
semi-closed-form characteristic-function pricer and Black-Scholes.
"""
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.stats import norm

from .exceptions import HestonError, OracleIntegrationError
from .params import ModelParams
from .pricing import Payoff

logger = logging.getLogger(__name__)


def _settings():
    from django.conf import settings
    return settings.HESTON


def risk_neutral(m: ModelParams) -> Tuple[float, float]:
    """(kappa*, theta*) without the strict parameter checks, so sigma = 0 is allowed."""
    kappa_star = m.kappa + m.lambda_
    theta_star = m.theta if m.lambda_ == 0 else m.kappa * m.theta / kappa_star
    return kappa_star, theta_star


@dataclass(frozen=True)
class McConfig:
    paths: int
    steps: Optional[int] = None
    seed: int = 0
    antithetic: bool = False
    scheme: str = 'full_truncation'
    block_size: Optional[int] = None
    workers: Optional[int] = None
    keep_payoffs: bool = False

    def __post_init__(self):
        if self.paths <= 0:
            raise HestonError('Path count must be positive', code='invalid_mc_config')
        if self.steps is not None and self.steps <= 0:
            raise HestonError('Step count must be positive', code='invalid_mc_config')
        if self.scheme != 'full_truncation':
            raise HestonError('Only the full-truncation scheme is supported', code='invalid_mc_config')

    def resolved_steps(self, T: float) -> int:
        if self.steps is not None:
            return self.steps
        return max(1, int(round(_settings()['MC_STEPS_PER_YEAR'] * T)))


@dataclass
class McEstimate:
    price: float
    std_error: float
    paths: int
    samples: int
    payoffs: Optional[np.ndarray] = None

    def as_dict(self) -> Dict:
        return {'price': self.price, 'stdError': self.std_error, 'paths': self.paths, 'samples': self.samples}


def _block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _simulate_block(m: ModelParams, S0: float, v0: float, payoff: Callable, steps: int,
                    size: int, seed: int, block: int, antithetic: bool) -> np.ndarray:
    """Discounted payoff samples of one block; antithetic pairs are averaged into one sample."""
    rng = _block_generator(seed, block)
    kappa, theta = risk_neutral(m)
    dt = m.T / steps
    sqrt_dt = math.sqrt(dt)
    rho_bar = math.sqrt(1.0 - m.rho ** 2)
    copies = 2 if antithetic else 1

    x = np.full((copies, size), math.log(S0))
    v = np.full((copies, size), float(v0))
    for _ in range(steps):
        z = rng.standard_normal((2, size))
        if antithetic:
            z1 = np.stack([z[0], -z[0]])
            z2 = np.stack([z[1], -z[1]])
        else:
            z1, z2 = z[0][None, :], z[1][None, :]
        dW = sqrt_dt * z1
        dZ = sqrt_dt * (m.rho * z1 + rho_bar * z2)
        v_plus = np.maximum(v, 0.0)
        root = np.sqrt(v_plus)
        x = x + (m.r - m.q - 0.5 * v_plus) * dt + root * dW
        v = v + kappa * (theta - v_plus) * dt + m.sigma * root * dZ

    values = math.exp(-m.r * m.T) * payoff(np.exp(x))
    return values.mean(axis=0)


def _combine(blocks: List[np.ndarray]) -> Tuple[float, float, int]:
    """Pairwise mean/M2 merge in block order."""
    count, mean, m2 = 0, 0.0, 0.0
    for values in blocks:
        n_b = values.size
        mean_b = float(values.mean())
        m2_b = float(np.sum((values - mean_b) ** 2))
        delta = mean_b - mean
        total = count + n_b
        mean += delta * n_b / total
        m2 += m2_b + delta ** 2 * count * n_b / total
        count = total
    return mean, m2, count


def mc_price(m: ModelParams, S0: float, v0: float, payoff: Union[Payoff, Callable], cfg: McConfig) -> McEstimate:
    """
    Monte Carlo price e^(-rT) E[h(S_T)] with log-Euler for X and full truncation for V.

    Each fixed-size block draws from its own Philox stream keyed by (seed, block),
    so serial and threaded runs give bit-identical estimates.
    """
    if not (S0 > 0 and v0 > 0):
        raise HestonError('S0 and v0 must be positive', code='invalid_mc_input')
    func = payoff.of_spot if isinstance(payoff, Payoff) else payoff
    steps = cfg.resolved_steps(m.T)
    block = cfg.block_size or _settings()['MC_BLOCK_SIZE']
    sizes = [block] * (cfg.paths // block)
    if cfg.paths % block:
        sizes.append(cfg.paths % block)

    def run(index: int) -> np.ndarray:
        return _simulate_block(m, S0, v0, func, steps, sizes[index], cfg.seed, index, cfg.antithetic)

    workers = cfg.workers if cfg.workers is not None else _settings()['MC_WORKERS']
    if workers and workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, range(len(sizes))))
    else:
        blocks = [run(index) for index in range(len(sizes))]

    mean, m2, count = _combine(blocks)
    std = math.sqrt(m2 / (count - 1)) if count > 1 else 0.0
    estimate = McEstimate(
        price=mean,
        std_error=std / math.sqrt(count),
        paths=count * (2 if cfg.antithetic else 1),
        samples=count,
        payoffs=np.concatenate(blocks) if cfg.keep_payoffs else None,
    )
    logger.info("MC price %.6f +- %.6f (%d paths, %d steps)", estimate.price, estimate.std_error,
                estimate.paths, steps)
    return estimate


def characteristic_function(u, m: ModelParams, S0: float, v0: float, T: Optional[float] = None):
    """E[exp(iu log S_T)] in the branch-cut-free form with g = (b - d)/(b + d)."""
    T = m.T if T is None else T
    kappa, theta = risk_neutral(m)
    sigma, rho = m.sigma, m.rho
    u = np.asarray(u, dtype=complex)
    b = kappa - rho * sigma * 1j * u
    d = np.sqrt(b ** 2 + sigma ** 2 * (1j * u + u ** 2))
    g = (b - d) / (b + d)
    decay = np.exp(-d * T)
    C = (kappa * theta / sigma ** 2) * ((b - d) * T - 2.0 * np.log((1.0 - g * decay) / (1.0 - g)))
    D = ((b - d) / sigma ** 2) * (1.0 - decay) / (1.0 - g * decay)
    drift = 1j * u * (math.log(S0) + (m.r - m.q) * T)
    return np.exp(drift + C + D * v0)


def _probability(integrand: Callable[[float], float], tol: float = 1e-12, max_upper: float = 1e5) -> float:
    """1/2 + 1/pi int_0^inf integrand, on doubling panels until the last one is negligible."""
    total, lower, upper = 0.0, 0.0, 50.0
    while True:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', IntegrationWarning)
            part, error = quad(integrand, lower, upper, limit=400, epsabs=1e-13, epsrel=1e-12)[:2]
        if not math.isfinite(part) or error > 1e-8:
            raise OracleIntegrationError(
                {'lower': lower, 'upper': upper, 'errorEstimate': error, 'integrand': float(integrand(upper))},
                detail=f"Characteristic-function integral did not converge on [{lower:g}, {upper:g}]",
            )
        total += part
        if abs(part) < tol and abs(integrand(upper)) < tol:
            break
        if upper >= max_upper:
            raise OracleIntegrationError(
                {'upper': upper, 'lastPanel': part, 'integrand': float(integrand(upper))},
                detail=f"Integrand tail not negligible at u = {upper:g}",
            )
        lower, upper = upper, 2.0 * upper
    return 0.5 + total / math.pi


def closed_form_price(m: ModelParams, S0: float, v0: float, kind: str = 'call') -> float:
    """
    Heston price from the two probabilities P1, P2 of the characteristic-function
    representation; puts by put-call parity.
    """
    if kind not in ('call', 'put'):
        raise HestonError(f"Closed form supports call and put, not '{kind}'", code='invalid_payoff')
    if not (S0 > 0 and v0 >= 0 and m.sigma > 0 and m.T > 0):
        raise HestonError('Closed form needs S0 > 0, v0 >= 0, sigma > 0, T > 0', code='invalid_oracle_input')
    log_K = math.log(m.K)
    forward = S0 * math.exp((m.r - m.q) * m.T)

    def p1(u):
        value = np.exp(-1j * u * log_K) * characteristic_function(u - 1j, m, S0, v0) / (1j * u * forward)
        return float(value.real)

    def p2(u):
        value = np.exp(-1j * u * log_K) * characteristic_function(u, m, S0, v0) / (1j * u)
        return float(value.real)

    P1 = _probability(p1)
    P2 = _probability(p2)
    call = S0 * math.exp(-m.q * m.T) * P1 - m.K * math.exp(-m.r * m.T) * P2
    if kind == 'call':
        return call
    return call - S0 * math.exp(-m.q * m.T) + m.K * math.exp(-m.r * m.T)


def black_scholes_price(S0: float, K: float, T: float, r: float, q: float, variance: float, kind: str = 'call') -> float:
    """Black-Scholes price with constant variance."""
    vol = math.sqrt(variance)
    if vol * math.sqrt(T) == 0:
        intrinsic = S0 * math.exp(-q * T) - K * math.exp(-r * T)
        return max(intrinsic, 0.0) if kind == 'call' else max(-intrinsic, 0.0)
    d1 = (math.log(S0 / K) + (r - q + 0.5 * variance) * T) / (vol * math.sqrt(T))
    d2 = d1 - vol * math.sqrt(T)
    if kind == 'call':
        return S0 * math.exp(-q * T) * norm.cdf(d1) - K * math.exp(-r * T) * norm.cdf(d2)
    return K * math.exp(-r * T) * norm.cdf(-d2) - S0 * math.exp(-q * T) * norm.cdf(-d1)


def closed_form_vega_sign(m: ModelParams, S0: float, v0: float, bump: float = 1e-4) -> float:
    """Sign of d C / d v0 by a central difference of the closed form."""
    up = closed_form_price(m, S0, v0 + bump, 'call')
    down = closed_form_price(m, S0, max(v0 - bump, 0.0), 'call')
    return float(np.sign(up - down))
