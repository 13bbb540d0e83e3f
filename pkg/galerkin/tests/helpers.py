"""Shared parameter sets for the galerkin tests"""
from galerkin.basis import TensorBasis, suggest_scales
from galerkin.operators import assemble
from galerkin.params import ModelParams, transform, validate
from galerkin.quadspace import GridSpec, build_grid

# sigma = 1, kappa* = 3.5, theta* = 0.6, rho = -0.5; admissible with gamma = 2
REFERENCE = ModelParams(r=0.0, q=0.0, kappa=3.5, theta=0.6, sigma=1.0, rho=-0.5,
                        lambda_=0.0, K=100.0, T=0.5)

# put benchmark S0 = K = 100, v0 = 0.04
BENCHMARK = ModelParams(r=0.0, q=0.0, kappa=2.0, theta=0.04, sigma=0.3, rho=-0.5,
                        lambda_=0.0, K=100.0, T=0.5)


def admissible_setup(m: ModelParams = REFERENCE, gamma: float = 2.0, orders: int = 6):
    """(report, basis, grid, matrices) for a small admissible problem."""
    t = transform(m)
    report = validate(t, gamma)
    w = report.weight
    x_scale, xi_scale = suggest_scales(w, orders, orders)
    basis = TensorBasis(orders, orders, x_scale, xi_scale)
    grid = build_grid(w, GridSpec.from_settings().for_orders(orders, orders, x_scale, xi_scale))
    return report, basis, grid, assemble(basis, grid, t, w)


def config_dict(model: ModelParams = REFERENCE, **sections) -> dict:
    """RunConfig JSON for the heston command."""
    config = {
        'model': {'r': model.r, 'q': model.q, 'kappa': model.kappa, 'theta': model.theta,
                  'sigma': model.sigma, 'rho': model.rho, 'lambda': model.lambda_,
                  'K': model.K, 'T': model.T},
    }
    config.update(sections)
    return config
