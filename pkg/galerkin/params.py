"""
Model parameters, the reduction to the weighted-space problem, and
admissibility of the weight (Feller condition, kappa inequality, mu and beta
selection) with the explicit coercivity constants.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

from .exceptions import InvalidParameterError

logger = logging.getLogger(__name__)

C3_ROUNDING = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Raw Heston inputs. ``lambda_`` is the price-of-volatility-risk coefficient."""
    r: float
    q: float
    kappa: float
    theta: float
    sigma: float
    rho: float
    lambda_: float
    K: float
    T: float

    def check_invariants(self) -> None:
        """Raise InvalidParameterError naming the first violated invariant."""
        checks = [
            ('kappa > 0', self.kappa > 0),
            ('theta > 0', self.theta > 0),
            ('sigma > 0', self.sigma > 0),
            ('|rho| < 1', abs(self.rho) < 1),
            ('lambda >= 0', self.lambda_ >= 0),
            ('K > 0', self.K > 0),
            ('T > 0', self.T > 0),
        ]
        for invariant, ok in checks:
            if not ok:
                raise InvalidParameterError(invariant)

    def with_overrides(self, **changes) -> 'ModelParams':
        return replace(self, **changes)


@dataclass(frozen=True)
class TransformedParams:
    kappa_star: float
    theta_star: float
    sigma: float
    rho: float
    q_r: float

    @property
    def theta_sigma(self) -> float:
        return self.theta_star / self.sigma

    @property
    def feller_ratio(self) -> float:
        return 2.0 * self.kappa_star * self.theta_star / self.sigma ** 2


@dataclass(frozen=True)
class WeightParams:
    beta: float
    gamma: float
    mu: float


@dataclass(frozen=True)
class CoercivityConstants:
    c1: float
    c2: float
    c3: float
    c1_prime: float
    c2_prime: float
    M1: float


@dataclass
class AdmissibilityReport:
    """Pass/fail per condition with slack; failures are reported, never raised."""
    params: TransformedParams
    gamma: float
    checks: List[Dict] = field(default_factory=list)
    weight: Optional[WeightParams] = None
    constants: Optional[CoercivityConstants] = None
    kappa_threshold: float = 0.0
    beta_max: float = 0.0

    @property
    def admissible(self) -> bool:
        return all(check['passed'] for check in self.checks)

    @property
    def violations(self) -> List[Dict]:
        return [
            {'rule': c['rule'], 'description': c['description'], 'severity': 'critical'}
            for c in self.checks if not c['passed']
        ]

    def check(self, rule: str) -> Dict:
        for item in self.checks:
            if item['rule'] == rule:
                return item
        raise KeyError(rule)


def transform(m: ModelParams) -> TransformedParams:
    """
    Absorb the price of volatility risk and the interest rate.

    Args:
        m: raw model parameters

    Returns:
        TransformedParams with kappa* = kappa + lambda, theta* = kappa theta / kappa*
    """
    m.check_invariants()
    kappa_star = m.kappa + m.lambda_
    if m.lambda_ == 0:
        theta_star = m.theta
    else:
        theta_star = m.kappa * m.theta / kappa_star
    return TransformedParams(
        kappa_star=kappa_star,
        theta_star=theta_star,
        sigma=m.sigma,
        rho=m.rho,
        q_r=m.q - m.r,
    )


def default_gamma(kind: str) -> float:
    """2.5 for calls (H-membership needs gamma > 2), 0.5 otherwise."""
    from django.conf import settings
    if kind == 'call':
        return settings.HESTON['GAMMA_CALL']
    return settings.HESTON['GAMMA_PUT']


def kappa_threshold(t: TransformedParams, gamma: float) -> float:
    return t.sigma * (gamma * abs(t.rho) + math.sqrt(gamma * (1.0 + gamma)))


def beta_max(t: TransformedParams) -> float:
    return 2.0 * t.kappa_star * t.theta_star / t.sigma ** 2


def select_beta(t: TransformedParams) -> float:
    """beta = min(2, 2 kappa* theta* / sigma^2)."""
    return min(2.0, beta_max(t))


def coercivity_constants(t: TransformedParams, w: WeightParams) -> CoercivityConstants:
    """
    Explicit constants of the boundedness and Garding estimates.

    Args:
        t: transformed parameters (kappa, theta enter as kappa*, theta*/sigma)
        w: weight parameters

    Returns:
        CoercivityConstants
    """
    kappa, sigma, rho, q_r = t.kappa_star, t.sigma, t.rho, t.q_r
    theta_s = t.theta_sigma
    beta, gamma, mu = w.beta, w.gamma, w.mu

    c1 = (mu * kappa - sigma * (gamma ** 2 + mu ** 2) / 2.0) - sigma * gamma * abs(0.5 - mu * rho)
    c1_prime = mu * kappa - sigma * (gamma ** 2 + mu ** 2) / 2.0 - sigma * gamma * (0.5 + mu * abs(rho))
    c2 = (beta * mu * sigma - kappa * (beta + mu * theta_s)) - gamma * abs(beta * rho * sigma + q_r)
    c3 = (beta - 1.0) * (kappa * theta_s - beta * sigma / 2.0)
    c2_prime = sigma * (1.0 - abs(rho)) + abs(c2)
    M1 = 2.0 * max(
        (1.0 + gamma) * sigma / 2.0,
        abs(kappa - mu * sigma / 2.0) + gamma * abs(rho) * sigma,
        abs(q_r),
        abs(beta * sigma / 2.0 - kappa * theta_s),
    )
    return CoercivityConstants(c1=c1, c2=c2, c3=c3, c1_prime=c1_prime, c2_prime=c2_prime, M1=M1)


def _check(rule: str, description: str, slack: float, passed: bool) -> Dict:
    return {'rule': rule, 'description': description, 'slack': slack, 'passed': bool(passed)}


def validate(t: TransformedParams, gamma: float, beta: Optional[float] = None) -> AdmissibilityReport:
    """
    Certify admissibility of the weighted formulation.

    Every inequality is evaluated with zero tolerance, except that c3 may sit
    a rounding error below zero: beta = beta_max makes it vanish exactly.
    Slacks are negative (or zero for the non-strict ones) when a condition holds.

    Args:
        t: transformed parameters
        gamma: exponent of the x-weight, gamma > 0
        beta: optional override of the xi-weight exponent

    Returns:
        AdmissibilityReport with derived WeightParams and CoercivityConstants
    """
    if not gamma > 0:
        raise InvalidParameterError('gamma > 0')

    report = AdmissibilityReport(params=t, gamma=gamma)
    sigma = t.sigma

    feller_slack = sigma ** 2 / 2.0 - t.kappa_star * t.theta_star
    report.checks.append(_check(
        'FELLER_CONDITION',
        f"sigma^2/2 - kappa*theta* = {feller_slack:.6g} must be < 0",
        feller_slack, feller_slack < 0,
    ))

    threshold = kappa_threshold(t, gamma)
    report.kappa_threshold = threshold
    kappa_slack = threshold - t.kappa_star
    report.checks.append(_check(
        'KAPPA_BOUND',
        f"kappa* = {t.kappa_star:.6g} must be >= {threshold:.6g}",
        kappa_slack, kappa_slack <= 0,
    ))

    mu = t.kappa_star / sigma - gamma * abs(t.rho)
    report.checks.append(_check(
        'MU_POSITIVE',
        f"mu = kappa*/sigma - gamma|rho| = {mu:.6g} must be > 0",
        -mu, mu > 0,
    ))

    b_max = beta_max(t)
    report.beta_max = b_max
    chosen = select_beta(t) if beta is None else float(beta)
    beta_ok = 1.0 < chosen <= b_max
    report.checks.append(_check(
        'BETA_RANGE',
        f"beta = {chosen:.6g} must lie in (1, {b_max:.6g}]",
        max(1.0 - chosen, chosen - b_max), beta_ok,
    ))

    if mu > 0 and chosen > 1.0:
        weight = WeightParams(beta=chosen, gamma=gamma, mu=mu)
        constants = coercivity_constants(t, weight)
        report.weight = weight
        report.constants = constants
        report.checks.append(_check(
            'C1_PRIME_NONNEGATIVE',
            f"c1' = {constants.c1_prime:.6g} must be >= 0",
            -constants.c1_prime, constants.c1_prime >= 0,
        ))
        report.checks.append(_check(
            'C3_NONNEGATIVE',
            f"c3 = {constants.c3:.6g} must be >= 0",
            -constants.c3, constants.c3 >= -C3_ROUNDING * max(1.0, t.kappa_star * t.theta_sigma),
        ))

    if report.admissible:
        logger.info("Parameters admissible: mu=%.6g beta=%.6g c2'=%.6g",
                    report.weight.mu, report.weight.beta, report.constants.c2_prime)
    else:
        logger.warning("Parameters not admissible: %s",
                       ', '.join(v['rule'] for v in report.violations))
    return report


def path_condition(t: TransformedParams, w: WeightParams, kappa0: float, nu0: float,
                   T_prime: float, boundedness_constant: float, lipschitz: float = 1.0) -> Dict:
    """
    Sufficient smallness condition of the path estimate:
    C~ = 2C/nu0 + 6 L kappa0 + 2L(1 + 1/nu0)(sigma + 2 kappa theta_sigma) kappa0 T'
    must not exceed sigma(1 - |rho|).
    """
    c_tilde = (
        2.0 * boundedness_constant / nu0
        + 6.0 * lipschitz * kappa0
        + 2.0 * lipschitz * (1.0 + 1.0 / nu0)
        * (t.sigma + 2.0 * t.kappa_star * t.theta_sigma) * kappa0 * T_prime
    )
    bound = t.sigma * (1.0 - abs(t.rho))
    return {
        'cTilde': c_tilde,
        'bound': bound,
        'holds': c_tilde <= bound,
        'tanCondition': kappa0 * T_prime <= math.pi / 4.0,
    }
