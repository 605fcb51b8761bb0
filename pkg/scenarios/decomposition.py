"""1-Lipschitz / matter decomposition of the drift Hamiltonian and the Newtonian coefficient."""
import logging
from typing import Any, Dict

import numpy as np
from scipy import constants

from hr_systems.geometry import BetaField
from hr_systems.lipschitz import (
    Box, RadialProfile, calibrate_profile_scale, certify_lipschitz_on_compact, decomposition_residual,
    newton_alpha, newton_alpha_ratios, newton_alpha_sweep, normalized, radial_decompose,
)

from .builders import ScenarioContext, build_beta, build_structure

log = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-12
ATOMIC_ALPHA_LIMIT = 1e-30
MASS_DOUBLING_RATIO = 4.0
DEFAULT_S0_GRID = [0.05, 0.1, 0.25, 0.5, 1.0, 2.0]


def drift_hamiltonian(beta: BetaField):
    """H(z) = beta(u) . p on rows z = (u, p)."""
    n = beta.dim

    def H(z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return np.sum(beta(z[:, :n]) * z[:, n:], axis=1)

    return H


def newton_checks(ctx: ScenarioContext) -> Dict[str, Any]:
    cfg = ctx.config
    ratio_value = newton_alpha_ratios(1.0, 1.0, 1.0)
    ctx.tracker.record('LP004', ratio_value == 2.0, value=ratio_value, threshold=2.0)

    bohr = constants.physical_constants['Bohr radius'][0]
    atomic = newton_alpha(constants.m_e, constants.m_e, bohr)
    ctx.tracker.record('LP005', atomic.alpha < ATOMIC_ALPHA_LIMIT, value=atomic.alpha,
                       threshold=ATOMIC_ALPHA_LIMIT, notes='electron pair at the Bohr radius')

    doubled = newton_alpha(2.0 * constants.m_e, 2.0 * constants.m_e, bohr).alpha / atomic.alpha
    ctx.tracker.record('LP006', abs(doubled - MASS_DOUBLING_RATIO) < 1e-9 * MASS_DOUBLING_RATIO, value=doubled,
                       threshold=MASS_DOUBLING_RATIO, notes='both masses doubled at the Bohr radius')

    masses = [float(m) for m in cfg.param('sweep_masses', [constants.m_e, constants.m_p, 1.0])]
    radii = [float(r) for r in cfg.param('sweep_radii', [1e-15, bohr, 1.0])]
    sweep = newton_alpha_sweep(masses, radii, float(cfg.param('lambda', 1.0)))
    ctx.writer.write_table(sweep, 'newton_alpha')
    return {
        'ratio_form_unit_inputs': ratio_value,
        'atomic': atomic.to_dict(),
        'mass_doubling_ratio': doubled,
    }


def run(ctx: ScenarioContext) -> Dict[str, Any]:
    cfg = ctx.config
    beta = build_beta(cfg)
    build_structure(cfg, beta)
    H_raw = drift_hamiltonian(beta)
    dim = 2 * beta.dim
    K = Box.cube(dim, float(cfg.param('box_half_width', 1.0)))
    pairs = int(cfg.param('pairs', 10_000))
    profile = cfg.param('profile', 'reciprocal')

    log.info(f"Certifying H on the {dim}-dimensional box...")
    raw_certificate = certify_lipschitz_on_compact(H_raw, K, pairs, cfg.seed)
    H = normalized(H_raw, raw_certificate.normalization)

    s0_grid = [float(s) for s in cfg.param('s0_grid', DEFAULT_S0_GRID)]
    s0, calibration = calibrate_profile_scale(H, K, s0_grid, profile, margin=2.0, pairs=pairs, seed=cfg.seed)
    if s0 is None:
        s0 = 1.0
    decomposition = radial_decompose(H, K, RadialProfile(profile, s0), estimate_pairs=pairs, seed=cfg.seed)

    test_points = K.scaled(3.0).sample(int(cfg.param('test_points', 10_000)), cfg.seed, 'decomposition-test-points')
    residual = decomposition_residual(H, decomposition, test_points)
    ctx.tracker.record('LP001', residual < RESIDUAL_TOLERANCE, value=residual, threshold=RESIDUAL_TOLERANCE)

    inside = test_points[K.contains(test_points)]
    if inside.shape[0] == 0:
        inside = K.sample(1000, cfg.seed, 'decomposition-inside')
    matter_inside = float(np.max(np.abs(decomposition.matter_part(inside))))
    ctx.tracker.record('LP002', matter_inside == 0.0, value=matter_inside, threshold=0.0,
                       notes=f"{inside.shape[0]} test points inside K")

    outer_certificate = certify_lipschitz_on_compact(decomposition.lipschitz_part, K.scaled(2.0), pairs, cfg.seed)
    ctx.tracker.record('LP003', outer_certificate.passed, value=outer_certificate.estimate, threshold=1.0,
                       notes=f"s0={s0}")

    newton = newton_checks(ctx)
    ctx.writer.write_table(calibration, 'profile_calibration')
    report = {
        'scenario': 'decompose',
        'beta': beta.describe(),
        'raw_certificate': raw_certificate.to_dict(),
        'decomposition': decomposition.to_dict(),
        'outer_certificate': outer_certificate.to_dict(),
        'residual': residual,
        'matter_inside_K': matter_inside,
        'newton': newton,
    }
    ctx.writer.write_report(report, 'decomposition_report')
    log.info(f"Decomposition residual {residual:.3g}, outer Lipschitz estimate {outer_certificate.estimate:.4g}")
    return report
