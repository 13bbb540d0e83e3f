"""
Run workflows behind the heston management command.

Each workflow takes a validated run configuration, writes its CSV/JSON
artifacts and returns a RunResult with the payload data and exit status.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from django.conf import settings

from . import exporters
from .basis import ProjectionResult, TensorBasis, decay_constant, suggest_scales
from .evolution import (PathParams, SolveConfig, TrajectoryReport, evolve, evolve_along_path, evolve_shifted,
                        gamma_to_path, weak_residual)
from .exceptions import EXIT_OK, EXIT_VALIDATION, EXIT_VIOLATION, HestonError, OracleIntegrationError
from .operators import (OperatorMatrices, ShiftParams, assemble, boundary_diagnostic, certify_bounded,
                        certify_garding, explicit_boundedness_constant, export_npz, triplet_rows)
from .oracle import McConfig, black_scholes_price, closed_form_price, closed_form_vega_sign, mc_price
from .params import ModelParams, default_gamma, path_condition, transform, validate
from .pricing import Payoff, SolvedState, completeness_report, price_at, price_surface, project_payoff
from .quadspace import GridSpec, QuadratureGrid, build_grid, inequality_family, inequality_suite
from .serializers import (AdmissibilityReportSerializer, CertReportSerializer, CompletenessEntrySerializer,
                          InequalityReportSerializer, McEstimateSerializer, TrajectorySummarySerializer)

logger = logging.getLogger(__name__)

DEFAULT_ORDERS = 16
DEFAULT_DT = 1e-2
WEAK_RESIDUAL_LIMIT = 1e-8
# workflows that need an admissible weighted formulation
NUMERIC_SUBCOMMANDS = ('check', 'solve', 'price', 'shift', 'complete')


@dataclass
class RunResult:
    data: Dict
    message: str
    exit_code: int = EXIT_OK
    artifacts: List[str] = field(default_factory=list)
    violations: List[Dict] = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return self.exit_code == EXIT_OK


def model_from_config(section: Dict) -> ModelParams:
    return ModelParams(
        r=section['r'], q=section.get('q', 0.0),
        kappa=section['kappa'], theta=section['theta'],
        sigma=section['sigma'], rho=section['rho'],
        lambda_=section.get('lambda', 0.0),
        K=section['K'], T=section['T'],
    )


class RunContext:
    """A validated run configuration and the objects derived from it on demand."""

    def __init__(self, config: Dict, output_dir: Optional[str] = None):
        self.config = config
        self.model = model_from_config(config['model'])
        self.kind = config.get('payoff', {}).get('kind', 'put')
        self.params = transform(self.model)
        weight = config.get('weight', {})
        self.gamma = weight.get('gamma') or default_gamma(self.kind)
        self.admissibility = validate(self.params, self.gamma, weight.get('beta'))
        self.output_dir = Path(output_dir or config.get('outputDir') or settings.HESTON['OUTPUT_DIR'])

    def section(self, name: str) -> Dict:
        return self.config.get(name) or {}

    @property
    def weight(self):
        return self.admissibility.weight

    @property
    def constants(self):
        return self.admissibility.constants

    @property
    def c2_prime(self) -> float:
        return self.constants.c2_prime

    @cached_property
    def basis(self) -> TensorBasis:
        section = self.section('basis')
        m_max = section.get('mMax', DEFAULT_ORDERS)
        n_max = section.get('nMax', DEFAULT_ORDERS)
        x_scale, xi_scale = 1.0, 1.0
        if section.get('autoScale', True):
            x_scale, xi_scale = suggest_scales(self.weight, m_max, n_max)
        return TensorBasis(m_max, n_max, section.get('xScale', x_scale), section.get('xiScale', xi_scale))

    @cached_property
    def grid(self) -> QuadratureGrid:
        section = self.section('grid')
        spec = GridSpec.from_settings(
            points_per_panel=section.get('pointsPerPanel'),
            x_panels=section.get('xPanels'),
            x_tail_panels=section.get('xTailPanels'),
            xi_panels=section.get('xiPanels'),
            xi_grading=section.get('xiGrading'),
            tail_mass=section.get('tailMass'),
        )
        b = self.basis
        return build_grid(self.weight, spec.for_orders(b.m_max, b.n_max, b.x_scale, b.xi_scale))

    @cached_property
    def matrices(self) -> OperatorMatrices:
        return assemble(self.basis, self.grid, self.params, self.weight)

    @cached_property
    def payoff(self) -> Payoff:
        return Payoff(self.kind, self.model.K)

    @cached_property
    def initial(self) -> ProjectionResult:
        return project_payoff(self.payoff, self.basis, self.grid, self.weight)

    def solve_config(self, t_end: Optional[float] = None) -> SolveConfig:
        section = self.section('solve')
        if t_end is None:
            t_end = section.get('tEnd', self.model.T)
        return SolveConfig(dt=section.get('dt', DEFAULT_DT), t_end=t_end,
                           theta_scheme=section.get('thetaScheme', 1.0))

    def mc_config(self) -> McConfig:
        section = self.section('oracle')
        return McConfig(
            paths=section.get('paths', 100_000),
            steps=section.get('steps'),
            seed=section.get('seed', 0),
            antithetic=section.get('antithetic', False),
            workers=section.get('workers'),
            keep_payoffs=section.get('dumpPaths', False),
        )

    def spot(self) -> Dict[str, float]:
        section = self.section('pricing')
        return {'S0': section.get('S0', self.model.K), 'v0': section.get('v0', self.model.theta)}

    def basis_summary(self) -> Dict:
        b = self.basis
        return {'mMax': b.m_max, 'nMax': b.n_max, 'xScale': b.x_scale, 'xiScale': b.xi_scale, 'size': b.size}

    def write_table(self, name: str, columns, rows) -> List[str]:
        paths = exporters.write_table(self.output_dir, name, columns, rows, parameters=self.config)
        return [paths['csv'], paths['meta']]

    def write_json(self, name: str, data: Dict) -> str:
        return exporters.write_json(self.output_dir, name, data)


def _critical(violations: List[Dict]) -> bool:
    return any(item.get('severity') == 'critical' for item in violations)


def _trajectory_data(report: TrajectoryReport) -> Dict:
    return dict(TrajectorySummarySerializer(report).data)


def run_validate(ctx: RunContext) -> RunResult:
    """Admissibility report of the weighted formulation."""
    report = ctx.admissibility
    data = dict(AdmissibilityReportSerializer(report).data)
    data['transformed'] = {
        'kappaStar': ctx.params.kappa_star,
        'thetaStar': ctx.params.theta_star,
        'thetaSigma': ctx.params.theta_sigma,
        'qR': ctx.params.q_r,
    }
    artifacts = [ctx.write_json('admissibility', data)]
    if report.admissible:
        return RunResult(data, 'Parameters are admissible', artifacts=artifacts)
    return RunResult(data, 'Parameters are not admissible', EXIT_VALIDATION, artifacts, report.violations)


def weak_form_residual(ctx: RunContext, t_end: float = 0.1) -> float:
    """Relative weak-form residual of a short Crank-Nicolson solve, tested against the initial coefficients."""
    cfg = SolveConfig(dt=min(ctx.solve_config().dt, t_end), t_end=t_end, theta_scheme=0.5)
    u0 = ctx.initial.coefficients
    report = evolve(ctx.matrices, u0, cfg, ctx.c2_prime, label='weak form', keep_states=True)
    phi = u0.values
    return weak_residual(ctx.matrices, report, lambda t: (phi, np.zeros_like(phi)))


def export_matrices(ctx: RunContext, shifts: List[ShiftParams]) -> List[str]:
    """matrices.npz with M, S, A and the shifted blocks, plus triplet CSVs of M and A."""
    ctx.output_dir.mkdir(parents=True, exist_ok=True)
    mats = ctx.matrices
    artifacts = [str(export_npz(mats, ctx.output_dir / 'matrices.npz', shifts))]
    artifacts += ctx.write_table('matrix_M', exporters.TRIPLET_COLUMNS, triplet_rows(mats.M))
    artifacts += ctx.write_table('matrix_A', exporters.TRIPLET_COLUMNS, triplet_rows(mats.A))
    return artifacts


def run_check(ctx: RunContext) -> RunResult:
    """Weighted-space inequality suite plus the Garding and boundedness certifications."""
    section = ctx.section('check')
    rows, failures, summary, worked = [], [], {}, None
    for func in inequality_family():
        suite = inequality_suite(func, ctx.grid, ctx.weight)
        worked = worked or suite
        for check, report in suite.items():
            rows.append({'function': func.name, 'check': check, 'lhs': report.lhs,
                         'rhs': report.rhs, 'passed': report.passed})
            summary.setdefault(check, {'passed': 0, 'failed': 0})['passed' if report.passed else 'failed'] += 1
            if not report.passed:
                failures.append({'rule': f'INEQUALITY_{check.upper()}',
                                 'description': f"{check} fails for {func.name}: lhs {report.lhs:.6g} > rhs {report.rhs:.6g}",
                                 'severity': 'critical'})

    mats = ctx.matrices
    trials = section.get('trials', 500)
    seed = section.get('seed', 0)
    garding = certify_garding(mats, ctx.constants, trials=trials, seed=seed, omegas=section.get('omegas', []))
    bounded = certify_bounded(mats, ctx.constants, trials=trials, seed=seed + 1)
    boundary = boundary_diagnostic(mats, ctx.grid)

    violations = failures + garding.violations + bounded.violations
    if not boundary['passed']:
        violations.append({'rule': 'BOUNDARY_TERMS', 'description': 'Boundary integrands above 1e-10',
                           'severity': 'warning'})

    path = ctx.section('path')
    C = explicit_boundedness_constant(ctx.params, ctx.weight, ctx.constants)
    condition = path_condition(ctx.params, ctx.weight, path.get('kappa0', 0.1), path.get('nu0', 10.0),
                               path.get('TPrime', 0.25), C)

    radius = ctx.section('shift').get('radius') or settings.HESTON['SHIFT_RADIUS']
    decay = decay_constant(ctx.initial.coefficients, r=radius, vartheta=math.atan(radius))

    data = {
        'inequalities': summary,
        'workedExample': {name: dict(InequalityReportSerializer(report).data) for name, report in worked.items()},
        'garding': dict(CertReportSerializer(garding).data),
        'bounded': dict(CertReportSerializer(bounded).data),
        'boundary': boundary,
        'pathCondition': condition,
        'decayConstant': decay,
        'basis': ctx.basis_summary(),
        'violations': violations,
    }
    if section.get('weakResidual', True):
        residual = weak_form_residual(ctx)
        data['weakResidual'] = residual
        if residual > WEAK_RESIDUAL_LIMIT:
            violations.append({'rule': 'WEAK_FORM',
                               'description': f'Crank-Nicolson weak-form residual {residual:.3e} above {WEAK_RESIDUAL_LIMIT:g}',
                               'severity': 'warning'})
    artifacts = ctx.write_table('inequalities', exporters.INEQUALITY_COLUMNS, rows)
    if section.get('exportMatrices', False):
        artifacts += export_matrices(ctx, [ShiftParams(omega=omega) for omega in section.get('omegas', [])])
    artifacts.append(ctx.write_json('certification', data))
    if _critical(violations):
        return RunResult(data, 'Verification found violations', EXIT_VIOLATION, artifacts, violations)
    return RunResult(data, 'All inequalities and certifications passed', artifacts=artifacts, violations=violations)


def run_solve(ctx: RunContext) -> RunResult:
    """Real evolution from the projected payoff with the energy envelope."""
    projection = ctx.initial
    report = evolve(ctx.matrices, projection.coefficients, ctx.solve_config(), ctx.c2_prime)
    data = {
        'trajectory': _trajectory_data(report),
        'projection': {'residual': projection.residual, 'normU0': projection.norm_u0,
                       'condition': projection.condition},
        'basis': ctx.basis_summary(),
    }
    artifacts = ctx.write_table('trajectory', exporters.TRAJECTORY_COLUMNS, report.to_rows())
    artifacts += ctx.write_table('coefficients', exporters.COEFFICIENT_COLUMNS, report.final.to_rows())
    if not report.passed:
        return RunResult(data, 'Trajectory exceeded its energy envelope', EXIT_VIOLATION, artifacts,
                         report.violations)
    return RunResult(data, 'Solve completed within the energy envelope', artifacts=artifacts)


def _comparison_row(method: str, price: Optional[float], reference: Optional[float],
                    std_error: Optional[float] = None) -> Dict:
    row = {'method': method, 'price': price, 'reference': reference, 'abs_error': None,
           'rel_error': None, 'std_error': std_error}
    if price is not None and reference is not None:
        row['abs_error'] = abs(price - reference)
        row['rel_error'] = abs(price - reference) / abs(reference) if reference != 0 else None
    return row


def run_price(ctx: RunContext) -> RunResult:
    """Price surface at maturity and the comparison table against the reference pricers."""
    m = ctx.model
    cfg = ctx.solve_config(m.T)
    report = evolve(ctx.matrices, ctx.initial.coefficients, cfg, ctx.c2_prime)
    state = SolvedState(report.final, m, cfg.t_end, ctx.kind)
    surface = price_surface(state, m)
    spot = ctx.spot()
    S0, v0 = spot['S0'], spot['v0']
    rel_tolerance = ctx.section('pricing').get('relTolerance', 0.02)

    violations = list(report.violations) + surface.flags()
    pde = price_at(state, m, S0, v0)
    try:
        reference = closed_form_price(m, S0, v0, ctx.kind)
    except OracleIntegrationError as exc:
        logger.error("Closed-form reference failed: %s", exc)
        reference = None
        violations.append({'rule': 'ORACLE_INTEGRATION', 'description': str(exc), 'severity': 'critical'})

    rows = [_comparison_row('pde', pde, reference)]
    if reference is not None:
        rows.append(_comparison_row('closed_form', reference, reference))
        if rows[0]['rel_error'] is not None and rows[0]['rel_error'] > rel_tolerance:
            violations.append({'rule': 'ORACLE_AGREEMENT',
                               'description': f"PDE price {pde:.6g} vs closed form {reference:.6g}: "
                                              f"relative error {rows[0]['rel_error']:.3e} > {rel_tolerance:g}",
                               'severity': 'critical'})
    rows.append(_comparison_row('black_scholes',
                                black_scholes_price(S0, m.K, m.T, m.r, m.q, v0, ctx.kind), reference))

    mc = None
    if 'oracle' in ctx.config:
        mc = mc_price(m, S0, v0, ctx.payoff, ctx.mc_config())
        rows.append(_comparison_row('mc', mc.price, reference, mc.std_error))
        if reference is not None and abs(mc.price - reference) > 3.0 * mc.std_error:
            violations.append({'rule': 'MC_AGREEMENT',
                               'description': f"MC {mc.price:.6g} is more than 3 standard errors from {reference:.6g}",
                               'severity': 'critical'})

    artifacts = ctx.write_table('surface', exporters.SURFACE_COLUMNS, surface.to_rows())
    artifacts += ctx.write_table('comparison', exporters.COMPARISON_COLUMNS, rows)
    data = {
        'S0': S0, 'v0': v0, 'tau': cfg.t_end, 'kind': ctx.kind,
        'pde': pde, 'closedForm': reference,
        'mc': dict(McEstimateSerializer(mc).data) if mc is not None else None,
        'comparison': rows,
        'trajectory': _trajectory_data(report),
        'basis': ctx.basis_summary(),
        'violations': violations,
    }
    if _critical(violations):
        return RunResult(data, 'Price run found violations', EXIT_VIOLATION, artifacts, violations)
    return RunResult(data, 'Price surface computed', artifacts=artifacts, violations=violations)


def _envelope_rows(report: TrajectoryReport) -> List[Dict]:
    return [
        {'run': report.label, 'step': row['step'], 's': row['t'], 'h_norm': row['h_norm'],
         'envelope': row['envelope'], 'slack': row['slack'], 'violated': row['violated']}
        for row in report.to_rows()
    ]


def run_shift(ctx: RunContext) -> RunResult:
    """Shifted and complex-path solves with their envelope checks."""
    u0 = ctx.initial.coefficients
    cfg = ctx.solve_config()
    mats = ctx.matrices
    shift = ctx.section('shift')
    reports = []
    for run in shift.get('runs') or [{}]:
        s = ShiftParams(
            y=run.get('y', 0.0), omega=run.get('omega', 0.0),
            omega_star=complex(run.get('omegaStarRe', 0.0), run.get('omegaStarIm', 0.0)),
        )
        reports.append(evolve_shifted(mats, u0, s, cfg, ctx.c2_prime, ctx.grid, shift.get('radius')))

    data = {'basis': ctx.basis_summary()}
    if 'path' in ctx.config:
        path = ctx.section('path')
        alpha = path.get('alpha', 0.5)
        base = PathParams(T_prime=path.get('TPrime', 0.25), kappa0=path.get('kappa0', 0.1), nu0=path.get('nu0', 10.0))
        paths = [replace(base, y0=run.get('y0', 0.0), omega0=run.get('omega0', 0.0), phi=run.get('phi', 0.0))
                 for run in path.get('runs') or []]
        # points of Gamma are reached at s = alpha by the path through them
        paths += [gamma_to_path(point.get('y', 0.0), point.get('omega', 0.0), alpha, point.get('tau', 0.0), base)
                  for point in path.get('gammaPoints') or []]
        for p in paths:
            reports.append(evolve_along_path(mats, u0, p, alpha, cfg, ctx.c2_prime,
                                             path.get('integrateByParts', False)))
        C = explicit_boundedness_constant(ctx.params, ctx.weight, ctx.constants)
        data['pathCondition'] = path_condition(ctx.params, ctx.weight, base.kappa0, base.nu0, base.T_prime, C)

    rows, violations = [], []
    for report in reports:
        rows.extend(_envelope_rows(report))
        violations.extend(dict(item, run=report.label) for item in report.violations)
    data['runs'] = [_trajectory_data(report) for report in reports]
    data['violations'] = violations
    artifacts = ctx.write_table('envelope', exporters.ENVELOPE_COLUMNS, rows)
    if violations:
        return RunResult(data, 'Envelope violated on at least one run', EXIT_VIOLATION, artifacts, violations)
    return RunResult(data, f'{len(reports)} runs stayed within their envelopes', artifacts=artifacts)


def run_complete(ctx: RunContext) -> RunResult:
    """Sign map of du/dxi on the interior grid at the requested times."""
    m = ctx.model
    section = ctx.section('pricing')
    times = section.get('times') or [m.T / 2.0, m.T]
    u0 = ctx.initial.coefficients
    surfaces, rows = [], []
    for tau in times:
        report = evolve(ctx.matrices, u0, ctx.solve_config(tau), ctx.c2_prime, label=f'tau={tau:g}')
        surface = price_surface(SolvedState(report.final, m, tau, ctx.kind), m)
        surfaces.append(surface)
        signs = np.sign(surface.du_dxi)
        for i, x in enumerate(surface.x):
            for k, v in enumerate(surface.v):
                rows.append({'tau': tau, 'x': float(x), 'v': float(v),
                             'du_dxi': float(surface.du_dxi[i, k]), 'sign': int(signs[i, k])})

    completeness = completeness_report(surfaces, section.get('tolerance', 0.0))
    vega_sign = None
    if ctx.kind == 'call':
        spot = ctx.spot()
        try:
            vega_sign = closed_form_vega_sign(m, spot['S0'], spot['v0'])
        except OracleIntegrationError as exc:
            logger.error("Closed-form vega failed: %s", exc)

    data = {
        'passed': completeness.passed,
        'tolerance': completeness.tolerance,
        'entries': CompletenessEntrySerializer(completeness.entries, many=True).data,
        'closedFormVegaSign': vega_sign,
        'basis': ctx.basis_summary(),
        'violations': completeness.violations,
    }
    artifacts = ctx.write_table('completeness', exporters.COMPLETENESS_COLUMNS, rows)
    artifacts.append(ctx.write_json('completeness', data))
    if not completeness.passed:
        return RunResult(data, 'Completeness diagnostic flagged a zero set', EXIT_VIOLATION, artifacts,
                         completeness.violations)
    return RunResult(data, 'du/dxi keeps one sign on the interior grid', artifacts=artifacts)


def run_mc(ctx: RunContext) -> RunResult:
    """Monte Carlo estimate with the closed form alongside."""
    m = ctx.model
    spot = ctx.spot()
    cfg = ctx.mc_config()
    estimate = mc_price(m, spot['S0'], spot['v0'], ctx.payoff, cfg)
    data = dict(McEstimateSerializer(estimate).data)
    data.update(spot)
    try:
        data['closedForm'] = closed_form_price(m, spot['S0'], spot['v0'], ctx.kind)
    except OracleIntegrationError as exc:
        logger.error("Closed-form reference failed: %s", exc)
        data['closedForm'] = None

    artifacts = [ctx.write_json('mc', data)]
    if cfg.keep_payoffs:
        artifacts += ctx.write_table(
            'payoffs', exporters.PAYOFF_COLUMNS,
            ({'sample': k, 'discounted_payoff': float(value)} for k, value in enumerate(estimate.payoffs)),
        )
    return RunResult(data, 'Monte Carlo estimate computed', artifacts=artifacts)


WORKFLOWS: Dict[str, Callable[[RunContext], RunResult]] = {
    'validate': run_validate,
    'check': run_check,
    'solve': run_solve,
    'price': run_price,
    'shift': run_shift,
    'complete': run_complete,
    'mc': run_mc,
}


def run(subcommand: str, config: Dict, output_dir: Optional[str] = None) -> RunResult:
    """
    Run one subcommand on a validated configuration.

    Args:
        subcommand: one of WORKFLOWS
        config: validated RunConfig data
        output_dir: overrides the configured output directory

    Returns:
        RunResult; errors raised by the numeric modules propagate
    """
    if subcommand not in WORKFLOWS:
        raise HestonError(f"Unknown subcommand '{subcommand}'", code='unknown_subcommand')
    ctx = RunContext(config, output_dir)
    logger.info("Running %s (payoff %s, gamma %.4g)", subcommand, ctx.kind, ctx.gamma)
    if subcommand in NUMERIC_SUBCOMMANDS and not ctx.admissibility.admissible:
        data = dict(AdmissibilityReportSerializer(ctx.admissibility).data)
        return RunResult(data, 'Parameters are not admissible', EXIT_VALIDATION,
                         violations=ctx.admissibility.violations)
    result = WORKFLOWS[subcommand](ctx)
    if result.artifacts:
        result.data['artifacts'] = [Path(path).name for path in result.artifacts]
    return result
