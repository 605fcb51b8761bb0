"""Weak equivalence: medians of differently composed systems follow the same path."""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from hr_systems.concentration import bound
from hr_systems.ensemble import MoleculeEnsemble, run_cycles
from hr_systems.errors import SetupError

from .builders import ScenarioContext, build_beta, build_cycle_settings, build_ensemble

log = logging.getLogger(__name__)

ENVELOPE_FACTOR = 5.0
SCALING_TOLERANCE = 0.2


@dataclass(frozen=True)
class SystemSpec:
    name: str
    N: int
    jitter_law: str
    m: float
    seed_offset: int
    center: Optional[Tuple[float, ...]] = None


def parse_systems(raw: Sequence[Dict[str, Any]], default_N: int, default_m: float) -> List[SystemSpec]:
    systems = []
    for index, item in enumerate(raw):
        center = item.get('center')
        systems.append(SystemSpec(
            name=str(item.get('name', chr(ord('A') + index))),
            N=int(item.get('N', default_N)),
            jitter_law=item.get('jitter_law', 'uniform'),
            m=float(item.get('m', default_m)),
            seed_offset=int(item.get('seed_offset', index)),
            center=tuple(float(c) for c in center) if center is not None else None,
        ))
    if len(systems) < 2:
        raise SetupError("weak equivalence needs at least two systems")
    return systems


def common_center(systems: Sequence[SystemSpec], spatial: int) -> np.ndarray:
    centers = {s.center for s in systems if s.center is not None}
    if len(centers) > 1:
        raise SetupError(f"mismatched initial medians: {sorted(centers)}")
    center = np.zeros(spatial) if not centers else np.asarray(centers.pop(), dtype=float)
    if center.size != spatial:
        raise SetupError(f"initial median needs {spatial} coordinates, got {center.size}")
    return center


def median_path(ctx: ScenarioContext, spec: SystemSpec, center: np.ndarray, cycles: int,
                seed: int, N: Optional[int] = None) -> np.ndarray:
    """Coordinate-wise median at the end of each contraction, shape (cycles + 1, d - 1)."""
    cfg = ctx.config
    ensemble: MoleculeEnsemble = build_ensemble(cfg, N=N or spec.N, seed=seed + spec.seed_offset, m=spec.m)
    ensemble = ensemble.recentered(center)
    settings = build_cycle_settings(cfg, jitter_law=spec.jitter_law)
    records, _ = run_cycles(ensemble, settings, cycles, build_beta(cfg))
    medians = [np.median(ensemble.positions, axis=0)]
    medians += [np.median(r.positions[r.end_of_contraction()], axis=0) for r in records]
    return np.asarray(medians)


def pairwise_deviation(paths: Dict[str, np.ndarray]) -> np.ndarray:
    """max over pairs and coordinates of |M_A - M_B| per tau step."""
    names = sorted(paths)
    worst = np.zeros(next(iter(paths.values())).shape[0])
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            worst = np.maximum(worst, np.max(np.abs(paths[a] - paths[b]), axis=1))
    return worst


def scaling_ratio(ctx: ScenarioContext, systems: Sequence[SystemSpec], center: np.ndarray,
                  cycles: int, seeds: int) -> Tuple[float, pd.DataFrame]:
    """RMS median gap at N over the RMS gap at 2N, across seed replicas."""
    a, b = systems[0], systems[1]
    rows = []
    rms = {}
    for factor in (1, 2):
        squares = []
        for replica in range(seeds):
            seed = ctx.seed + 1000 * (replica + 1)
            gap = (median_path(ctx, a, center, cycles, seed, a.N * factor)
                   - median_path(ctx, b, center, cycles, seed, b.N * factor))
            squares.append(np.mean(gap[1:] ** 2))
        rms[factor] = float(np.sqrt(np.mean(squares)))
        rows.append({'N': a.N * factor, 'replicas': seeds, 'rms_deviation': rms[factor]})
    ratio = rms[1] / rms[2] if rms[2] > 0 else float('nan')
    return ratio, pd.DataFrame(rows)


def run(ctx: ScenarioContext) -> Dict[str, Any]:
    cfg = ctx.config
    spatial = cfg.geometry.d - 1
    default_systems = [
        {'name': 'A', 'jitter_law': 'uniform', 'seed_offset': 0},
        {'name': 'B', 'jitter_law': 'gaussian', 'm': 2.0 * cfg.ensemble.m, 'seed_offset': 1},
    ]
    systems = parse_systems(cfg.param('systems', default_systems), cfg.ensemble.N, cfg.ensemble.m)
    center = common_center(systems, spatial)
    cycles = cfg.ensemble.cycles
    cell = float(cfg.param('cell_size', 0.2))

    log.info(f"Evolving {len(systems)} systems through {cycles} cycles...")
    paths = {spec.name: median_path(ctx, spec, center, cycles, cfg.seed) for spec in systems}
    deviation = pairwise_deviation(paths) / cell
    swapped = pairwise_deviation({name: paths[name] for name in reversed(sorted(paths))}) / cell

    N = min(spec.N for spec in systems)
    envelope = ENVELOPE_FACTOR / np.sqrt(N)
    T = build_cycle_settings(cfg).T
    tau = 2.0 * T * np.arange(cycles + 1)
    worst = float(np.max(deviation))
    ctx.tracker.record('WE001', worst < envelope, value=worst, threshold=envelope,
                       notes=f"grid units, cell {cell}")
    ctx.tracker.record('WE003', bool(np.array_equal(deviation, swapped)), value=float(np.max(swapped)),
                       threshold=worst)

    report: Dict[str, Any] = {
        'scenario': 'wep',
        'systems': [spec.__dict__ for spec in systems],
        'cycles': cycles,
        'cell_size': cell,
        'max_deviation': worst,
        'envelope': envelope,
        'hr_bound': bound('hr_scale', N=N),
    }
    if cfg.param('scaling_check', False):
        seeds = int(cfg.param('scaling_seeds', 32))
        log.info(f"Scaling check over {seeds} replicas...")
        ratio, scaling_df = scaling_ratio(ctx, systems, center, cycles, seeds)
        target = np.sqrt(2.0)
        ok = abs(ratio - target) <= SCALING_TOLERANCE * target
        ctx.tracker.record('WE002', ok, value=ratio, threshold=target, notes=f"tolerance {SCALING_TOLERANCE}")
        ctx.writer.write_table(scaling_df, 'wep_scaling')
        report['scaling_ratio'] = ratio

    median_rows = []
    for name, path in sorted(paths.items()):
        for step, row in enumerate(path):
            entry = {'tau': tau[step], 'system': name}
            entry.update({f"m{mu + 1}": row[mu] for mu in range(spatial)})
            median_rows.append(entry)
    ctx.writer.write_table(pd.DataFrame(median_rows), 'wep_medians')
    ctx.writer.write_table(pd.DataFrame({
        'tau': tau,
        'deviation': deviation,
        'envelope': envelope,
        'hr_bound': report['hr_bound'],
    }), 'wep_deviation')
    ctx.writer.write_report(report, 'wep_report')
    log.info(f"Max median deviation {worst:.4g} grid units (envelope {envelope:.4g})")
    return report
