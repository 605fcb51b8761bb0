"""Concentration-of-measure suite: sphere and Gaussian tails against closed-form bounds."""
import logging
from typing import Any, Dict

import numpy as np
import pandas as pd

from hr_systems.concentration import (
    SPHERE_CONSTANT, SPHERE_PRINTED_CONSTANT, GaussianSampler, SphereSampler, bound, empirical_concentration,
    empirical_lipschitz, quantum_scale_ratio,
)
from hr_systems.rng import stream

from .builders import ScenarioContext

log = logging.getLogger(__name__)


def first_coordinate(x: np.ndarray) -> np.ndarray:
    return x[:, 0]


def euclidean_norm(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x, axis=1)


def sphere_suite(ctx: ScenarioContext) -> Dict[str, Any]:
    cfg = ctx.config
    dim = int(cfg.param('sphere_dim', 99))
    samples = int(cfg.param('sphere_samples', 100_000))
    eps = [float(e) for e in cfg.param('sphere_eps', [0.1, 0.2, 0.3])]
    ambient = dim + 1

    sampler = SphereSampler(dim, samples, cfg.seed)
    report = empirical_concentration(first_coordinate, sampler, eps,
                                     bound_fn=lambda e: bound('sphere', N=ambient, eps=e),
                                     threads=cfg.threads)
    report.notes.update({
        'function': 'first_coordinate',
        'ambient_dimension': ambient,
        'constant': SPHERE_CONSTANT,
        'printed_constant': SPHERE_PRINTED_CONSTANT,
        'printed_bound': [SPHERE_PRINTED_CONSTANT * np.exp(-e**2 * (ambient - 1) / 2.0) for e in eps],
    })
    ctx.tracker.record('CM001', report.all_passed, value=float(np.max(report.empirical - report.bound)),
                       threshold='margin', notes=f"S^{dim}, {samples} samples")
    ctx.writer.write_table(report.to_frame(), 'sphere_tail')
    return report.to_dict()


def gaussian_suite(ctx: ScenarioContext) -> Dict[str, Any]:
    cfg = ctx.config
    dim = int(cfg.param('gaussian_dim', 1000))
    samples = int(cfg.param('gaussian_samples', 100_000))
    rho = [float(r) for r in cfg.param('gaussian_rho', [1.0, 2.0, 3.0])]
    rho_P = float(cfg.param('rho_P', 1.0))
    bound_fn = lambda r: bound('gaussian', rho=r, rho_P=rho_P)  # noqa: E731

    norm_report = empirical_concentration(euclidean_norm, GaussianSampler(dim, samples, cfg.seed), rho,
                                          bound_fn=bound_fn, threads=cfg.threads)
    norm_report.notes['function'] = 'euclidean_norm'
    first_report = empirical_concentration(first_coordinate, GaussianSampler(dim, samples, cfg.seed), rho,
                                           bound_fn=bound_fn, threads=cfg.threads)
    first_report.notes['function'] = 'first_coordinate'

    at_scale = int(np.argmin(np.abs(np.asarray(rho) - rho_P)))
    ctx.tracker.record('CM002', bool(norm_report.passed[at_scale]), value=float(norm_report.empirical[at_scale]),
                       threshold=float(norm_report.bound[at_scale] + norm_report.margin[at_scale]))
    ctx.tracker.record('CM003', None, value=float(first_report.empirical[at_scale]),
                       threshold=float(first_report.bound[at_scale]), notes='2 Phi(-1) exceeds the bound')

    # the norm is 1-Lipschitz: an empirical check on a few thousand pairs
    pairs_rng = stream(cfg.seed, 'gaussian-pairs')
    A = pairs_rng.standard_normal((2000, dim))
    B = A + 0.1 * pairs_rng.standard_normal((2000, dim))
    lipschitz = empirical_lipschitz(euclidean_norm, (A, B))

    ctx.writer.write_table(norm_report.to_frame(), 'gaussian_tail')
    ctx.writer.write_table(first_report.to_frame(), 'gaussian_first_coordinate')
    return {
        'norm': norm_report.to_dict(),
        'first_coordinate': first_report.to_dict(),
        'norm_lipschitz_estimate': lipschitz.estimate,
    }


def bound_tables(ctx: ScenarioContext) -> Dict[str, Any]:
    cfg = ctx.config
    dims = [int(n) for n in cfg.param('table_dims', [10, 50, 100, 500, 1000])]
    eps = float(cfg.param('table_eps', 0.1))
    rows = []
    for n in dims:
        rows.append({
            'N': n,
            'sphere': bound('sphere', N=n, eps=eps),
            'sphere_linear': bound('sphere_linear', N=n, eps=eps),
            'hr_scale': bound('hr_scale', N=n),
            'scale_ratio': quantum_scale_ratio(n),
        })
    table = pd.DataFrame(rows)
    decreasing = bool(np.all(np.diff(table['sphere'].to_numpy()) < 0))
    ctx.tracker.record('CM004', decreasing, value=float(table['sphere'].iloc[-1]), threshold=f"eps={eps}")
    ctx.writer.write_table(table, 'bound_tables')
    return {'eps': eps, 'decreasing': decreasing}


def run(ctx: ScenarioContext) -> Dict[str, Any]:
    log.info("Sphere suite...")
    sphere = sphere_suite(ctx)
    log.info("Gaussian suite...")
    gaussian = gaussian_suite(ctx)
    tables = bound_tables(ctx)
    report = {'scenario': 'concentration-suite', 'sphere': sphere, 'gaussian': gaussian, 'tables': tables}
    ctx.writer.write_report(report, 'concentration_report')
    return report
