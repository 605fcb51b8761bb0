"""Fundamental cycles with natural spontaneous reduction at the end of each contraction."""
import logging
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from hr_systems.concentration import collapse_metrics
from hr_systems.ensemble import run_cycles
from hr_systems.errors import DomainError
from hr_systems.flow import HullMember, commutation_check, interaction_class, metastable_residual, ut_deform
from hr_systems.geometry import PhasePoint, averaged_metric
from hr_systems.rng import stream

from .builders import (
    ScenarioContext, build_beta, build_cycle_settings, build_ensemble, build_sampler, build_schedule,
    build_structure, timelike_test_points,
)

log = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-9
VARIANCE_RATIO_LIMIT = 0.01


def hull_flow_limit(s, h, sched, members: int, test_points, seed: int) -> float:
    """max |F_T - sqrt|h|| over random convex-hull members."""
    weights = stream(seed, 'hull-members').uniform(0.0, 1.0, size=members)
    worst = 0.0
    for t1 in weights:
        member = HullMember(s, h, float(t1))
        for pt in test_points:
            target = np.sqrt(abs(float(pt.p @ h @ pt.p)))
            worst = max(worst, abs(ut_deform(member, h, sched, sched.T, pt) - target))
    return worst


def final_phase_points(record, structure, limit: int) -> List[PhasePoint]:
    """The cycle's final molecule states read as phase points of the structure.

    Consecutive molecules are grouped into blocks of structure.N; at most
    ``limit`` points are returned.
    """
    width = 2 * structure.d
    groups = record.final_u.shape[0] // structure.N
    if groups == 0:
        raise DomainError(f"ensemble of {record.final_u.shape[0]} molecules cannot fill a structure with N = {structure.N}")
    count = min(groups, limit)
    U = record.final_u[:count * structure.N].reshape(count, structure.N * width)
    P = record.final_p[:count * structure.N].reshape(count, structure.N * width)
    return [PhasePoint(U[k], P[k], structure.d) for k in range(count)]


def run(ctx: ScenarioContext) -> Dict[str, Any]:
    cfg = ctx.config
    sigma_f = float(cfg.param('sigma_f', 0.1))
    threshold = float(cfg.param('collapse_threshold', 1.0))
    n_test_points = int(cfg.param('test_points', 1000))

    log.info("Building structure and averaged metric...")
    structure = build_structure(cfg)
    schedule = build_schedule(cfg)
    u0 = np.zeros(structure.n)
    h = averaged_metric(structure, u0, build_sampler(cfg), cache=ctx.cache)
    test_points = timelike_test_points(structure, n_test_points, cfg.seed)

    log.info(f"Running {cfg.ensemble.cycles} cycles with N = {cfg.ensemble.N}...")
    settings = build_cycle_settings(cfg)
    ensemble = build_ensemble(cfg)
    records, _ = run_cycles(ensemble, settings, cfg.ensemble.cycles, build_beta(cfg))

    collapse_rows = []
    residual_rows = []
    for record in records:
        report = collapse_metrics(record, sigma_f, threshold)
        states = final_phase_points(record, structure, n_test_points)
        residual = metastable_residual(structure, h, schedule, states, schedule.T)
        drift = metastable_residual(structure, h, schedule, states, 0.0)
        collapse_rows.append({
            'cycle': report.cycle,
            'ergodic_variance': report.ergodic_variance,
            'contracted_variance': report.contracted_variance,
            'variance_ratio': report.variance_ratio,
            'spread': report.spread,
            'spread_ratio': report.spread_ratio,
            'collapsed': report.collapsed,
        })
        residual_rows.append({
            'cycle': record.cycle_index,
            't': (2 * record.cycle_index + 1) * schedule.T,
            'residual': residual,
            'drift_at_start': drift,
            'states': len(states),
        })

    variance_df = pd.concat([record.variance_frame() for record in records], ignore_index=True)
    collapse_df = pd.DataFrame(collapse_rows)
    residual_df = pd.DataFrame(residual_rows)

    events = int(collapse_df['collapsed'].sum())
    expected = len(records) if settings.contraction else 0
    ctx.tracker.record('CO001', events == expected, value=events, threshold=expected)
    worst_residual = float(residual_df['residual'].max())
    ctx.tracker.record('CO002', worst_residual < RESIDUAL_TOLERANCE, value=worst_residual,
                       threshold=RESIDUAL_TOLERANCE)
    if settings.contraction:
        worst_ratio = float(collapse_df['variance_ratio'].max())
        ctx.tracker.record('CO003', worst_ratio < VARIANCE_RATIO_LIMIT, value=worst_ratio,
                           threshold=VARIANCE_RATIO_LIMIT)
    classification = interaction_class(schedule)
    ctx.tracker.record('CO004', None, value=classification)

    hull_gap = hull_flow_limit(structure, h, schedule, int(cfg.param('hull_members', 10)), test_points, cfg.seed)
    ctx.tracker.record('FL001', hull_gap < RESIDUAL_TOLERANCE, value=hull_gap, threshold=RESIDUAL_TOLERANCE)
    commutation = commutation_check(structure, h, schedule, test_points[:100])

    ctx.writer.write_table(variance_df, 'variance')
    ctx.writer.write_table(collapse_df, 'collapse')
    ctx.writer.write_table(residual_df, 'metastable_residual')
    report = {
        'scenario': 'collapse',
        'cycles': len(records),
        'collapse_events': events,
        'interaction_class': classification,
        'sigma_f': sigma_f,
        'threshold': threshold,
        'settings': settings.describe(),
        'phase_variance': {str(r.cycle_index): r.phase_variance() for r in records},
        'hull_flow_limit': hull_gap,
        'commutation': {'max_discrepancy': commutation.max_discrepancy, 'passed': commutation.passed},
    }
    ctx.writer.write_report(report, 'collapse_report')
    log.info(f"Collapse events: {events}/{len(records)} | interaction: {classification}")
    return report
