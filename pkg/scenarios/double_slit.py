"""Two-aperture interference from world-line densities and assembled wave functions.

Grid axis 0 is the transverse coordinate y, axis 1 the flight coordinate z.
Each slit gets its own molecule ensemble in a (t, y, z) spacetime: molecules
leave the aperture at z = slit_z with a uniform offset inside it and a
Gaussian transverse slope, then follow the U_tau cycles of the ensemble code
(drift along their velocity sector plus ergodic jitter, no contraction) until
they reach the screen. Samples are folded back at the grid walls.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from hr_systems.ensemble import (
    ConstantPhase, CycleSettings, DensityField, EmergentWaveFunction, GridSpec, MoleculeEnsemble, MoleculePhase,
    PhaseModel, PlaneWavePhase, assemble_wavefunction, density_from_worldlines, run_cycles,
)
from hr_systems.errors import GeometryError
from hr_systems.geometry import LinearBeta
from hr_systems.rng import stream

from .builders import ScenarioContext, build_cycle_settings, build_grid

log = logging.getLogger(__name__)

VISIBILITY_FLOOR = 0.1
SPACING_TOLERANCE = 0.15
BORN_TOLERANCE = 1e-12
PHASE_MODELS = ('plane_wave', 'constant', 'molecule')
FLIGHT_DIMENSION = 3


@dataclass(frozen=True)
class SlitGeometry:
    separation: float = 1.0
    width: float = 0.1
    slit_z: float = 0.0
    lambda_eff: float = 0.1

    @property
    def centers(self) -> Tuple[float, float]:
        return (-0.5 * self.separation, 0.5 * self.separation)

    @property
    def k(self) -> float:
        return 2.0 * np.pi / self.lambda_eff

    def check(self, grid: GridSpec) -> None:
        if grid.ndim != 2:
            raise GeometryError(f"double-slit needs a 2-D (y, z) grid, got {grid.ndim} axes")
        for center in self.centers:
            lo, hi = center - 0.5 * self.width, center + 0.5 * self.width
            if lo < grid.lower[0] or hi > grid.upper[0]:
                raise GeometryError(f"aperture [{lo}, {hi}] lies outside the grid y-range")
        if not grid.lower[1] <= self.slit_z < grid.upper[1]:
            raise GeometryError(f"slit plane z = {self.slit_z} lies outside the grid z-range")


def fold(values: np.ndarray, lower: float, upper: float) -> np.ndarray:
    """Mirror values back into [lower, upper]."""
    width = upper - lower
    r = np.mod(values - lower, 2.0 * width)
    return lower + np.where(r > width, 2.0 * width - r, r)


@dataclass(frozen=True)
class FlightPlan:
    """Ensemble settings shared by every run through the apertures."""
    settings: CycleSettings
    speed: float
    slope_sigma: float
    steps: int
    cycles: int

    @classmethod
    def from_config(cls, cfg, geometry: SlitGeometry, grid: GridSpec) -> 'FlightPlan':
        speed = float(cfg.param('flight_speed', 0.5))
        if not 0.0 < speed < cfg.limits.c_max:
            raise GeometryError(f"flight_speed must lie in (0, c_max = {cfg.limits.c_max}), got {speed}")
        settings = build_cycle_settings(
            cfg,
            steps_per_semiperiod=int(cfg.param('steps_per_semiperiod', 10)),
            jitter=float(cfg.param('transverse_jitter', 0.002)),
            contraction=False,
        )
        steps = int(np.floor((grid.upper[1] - geometry.slit_z) / (speed * settings.dt) + 1e-9))
        if steps < 1:
            raise GeometryError(f"screen lies within one step of the slit plane (dz per step = {speed * settings.dt})")
        cycles = int(np.ceil(steps / (2 * settings.steps_per_semiperiod)))
        return cls(settings, speed, float(cfg.param('slope_sigma', 0.25)), steps, cycles)


def flight_beta(d: int, drift_factor: float, speed: float) -> LinearBeta:
    """Transverse drift read from the velocity sector (dx/dtau = y), constant drift along the flight axis."""
    matrix = np.zeros((2 * d, 2 * d))
    for mu in range(1, d - 1):
        matrix[mu, d + mu] = 1.0 / drift_factor
    offset = np.zeros(2 * d)
    offset[d - 1] = speed / drift_factor
    return LinearBeta(matrix, offset)


def slit_ensemble(cfg, centers: np.ndarray, geometry: SlitGeometry, plan: FlightPlan, label: str) -> MoleculeEnsemble:
    """Molecules leaving their apertures at z = slit_z with a Gaussian transverse slope."""
    d = FLIGHT_DIMENSION
    count = centers.size
    rng = stream(cfg.seed, 'double-slit', label)
    u = np.zeros((count, 2 * d))
    u[:, 1] = centers + geometry.width * (rng.uniform(size=count) - 0.5)
    u[:, 2] = geometry.slit_z
    u[:, d] = 1.0
    u[:, d + 1] = plan.speed * rng.normal(0.0, plan.slope_sigma, size=count)
    u[:, d + 2] = plan.speed
    p = np.zeros((count, 2 * d))
    p[:, 0] = 1.0
    e = cfg.ensemble
    jitter_seed = int(stream(cfg.seed, 'double-slit', label, 'jitter-seed').integers(2**31))
    return MoleculeEnsemble(N=count, d=d, u=u, p=p, m=e.m, M_sys=e.M_sys, T=plan.settings.T,
                            rng_seed=jitter_seed, alpha_et=e.alpha_et)


def fly(ensemble: MoleculeEnsemble, plan: FlightPlan, grid: GridSpec) -> np.ndarray:
    """U_tau evolution from the slit plane to the screen; world lines of shape (steps + 1, count, 2)."""
    beta = flight_beta(ensemble.d, plan.settings.drift_factor, plan.speed)
    records, _ = run_cycles(ensemble, plan.settings, plan.cycles, beta)
    paths = np.concatenate([records[0].positions] + [r.positions[1:] for r in records[1:]], axis=0)
    paths = paths[:plan.steps + 1].copy()
    # reflecting walls keep every sample on the grid
    for axis in range(2):
        paths[..., axis] = fold(paths[..., axis], grid.lower[axis], grid.upper[axis])
    return paths


def two_time_centers(geometry: SlitGeometry, molecules: int, instants: int, T: float, seed: int) -> np.ndarray:
    """Aperture per (internal-time instant, molecule).

    Molecule k sits at internal time t_k + j * 2T / instants in instant j and
    passes slit A during the first half of its cycle, slit B during the second.
    """
    t0 = stream(seed, 'double-slit', 'internal-time').uniform(0.0, 2.0 * T, size=molecules)
    t = np.mod(t0[None, :] + 2.0 * T * np.arange(instants)[:, None] / instants, 2.0 * T)
    center_a, center_b = geometry.centers
    return np.where(t < T, center_a, center_b).ravel()


def build_phase_model(name: str, geometry: SlitGeometry, center: float, points: np.ndarray,
                      seed: int) -> PhaseModel:
    if name == 'plane_wave':
        return PlaneWavePhase((0.0, geometry.k), source=(center, geometry.slit_z))
    if name == 'constant':
        return ConstantPhase()
    if name == 'molecule':
        return MoleculePhase(points.reshape(-1, 2), seed)
    raise GeometryError(f"unknown phase model '{name}', choose from {PHASE_MODELS}")


def superpose(psi_a: np.ndarray, psi_b: np.ndarray, cell_volume: float) -> np.ndarray:
    """C (psi_A + psi_B) with C fixing unit norm."""
    total = psi_a + psi_b
    norm = np.sum(np.abs(total) ** 2) * cell_volume
    return total / np.sqrt(norm)


def interference_profile(psi_a: np.ndarray, psi_b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(interference term, incoherent intensity) along a line."""
    cross = 2.0 * np.real(np.conj(psi_a) * psi_b)
    incoherent = np.abs(psi_a) ** 2 + np.abs(psi_b) ** 2
    return cross, incoherent


def visibility(psi_a: np.ndarray, psi_b: np.ndarray) -> float:
    cross, incoherent = interference_profile(psi_a, psi_b)
    if not np.any(incoherent > 0):
        return 0.0
    bright = incoherent >= VISIBILITY_FLOOR * np.max(incoherent)
    return float(np.max(np.abs(cross[bright]) / incoherent[bright]))


def fringe_spacing(y: np.ndarray, psi_a: np.ndarray, psi_b: np.ndarray, window: float) -> Optional[float]:
    """Dominant period of the normalised interference term inside |y| <= window."""
    cross, incoherent = interference_profile(psi_a, psi_b)
    inside = (np.abs(y) <= window) & (incoherent > 0)
    if np.sum(inside) < 8:
        return None
    signal = cross[inside] / incoherent[inside]
    signal = signal - np.mean(signal)
    dy = float(y[1] - y[0])
    n_pad = max(4096, 8 * signal.size)
    spectrum = np.abs(np.fft.rfft(signal, n=n_pad))
    freqs = np.fft.rfftfreq(n_pad, dy)
    spectrum[0] = 0.0
    peak = freqs[int(np.argmax(spectrum))]
    return float(1.0 / peak) if peak > 0 else None


def born_residual(n2: DensityField, wave: EmergentWaveFunction) -> Tuple[float, float]:
    """(|norm - 1|, max relative cellwise gap of N |psi|^2 against n2)."""
    scale = max(1.0, float(np.max(n2.values)))
    cellwise = float(np.max(np.abs(n2.N * wave.density() - n2.values))) / scale
    return abs(wave.norm - 1.0), cellwise


def run(ctx: ScenarioContext) -> Dict[str, Any]:
    cfg = ctx.config
    grid = build_grid(cfg)
    geometry = SlitGeometry(
        separation=float(cfg.param('slit_separation', 1.0)),
        width=float(cfg.param('slit_width', 0.1)),
        slit_z=float(cfg.param('slit_z', grid.lower[1] if grid.ndim > 1 else 0.0)),
        lambda_eff=float(cfg.param('lambda_eff', 0.1)),
    )
    geometry.check(grid)
    count = int(cfg.param('molecules_per_slit', 20000))
    plan = FlightPlan.from_config(cfg, geometry, grid)
    phase_name = cfg.param('phase_model', 'plane_wave')
    closed = cfg.param('closed_slit')

    log.info(f"Flying {count:,} molecules per slit over {plan.steps} steps ({plan.cycles} cycles)...")
    center_a, center_b = geometry.centers
    paths_a = fly(slit_ensemble(cfg, np.full(count, center_a), geometry, plan, 'A'), plan, grid)
    paths_b = fly(slit_ensemble(cfg, np.full(count, center_b), geometry, plan, 'B'), plan, grid)
    n2_a = density_from_worldlines(paths_a, grid)
    n2_b = density_from_worldlines(paths_b, grid)

    wave_a = assemble_wavefunction(n2_a, build_phase_model(phase_name, geometry, center_a, paths_a, cfg.seed))
    wave_b = assemble_wavefunction(n2_b, build_phase_model(phase_name, geometry, center_b, paths_b, cfg.seed + 1))
    born = [born_residual(n2_a, wave_a), born_residual(n2_b, wave_b)]
    worst_born = max(max(pair) for pair in born)
    ctx.tracker.record('EN001', worst_born < BORN_TOLERANCE, value=worst_born, threshold=BORN_TOLERANCE)

    psi_a = wave_a.amplitude
    psi_b = wave_b.amplitude if closed != 'B' else np.zeros_like(psi_a)
    if closed == 'A':
        psi_a = np.zeros_like(psi_b)
    superposed = superpose(psi_a, psi_b, grid.cell_volume)

    # one slit closed: the superposition must reduce to the open slit alone
    alone = superpose(wave_a.amplitude, np.zeros_like(wave_a.amplitude), grid.cell_volume)
    closed_gap = float(np.max(np.abs(np.abs(alone) ** 2 - wave_a.density())))
    closed_visibility = visibility(wave_a.amplitude[:, -1], np.zeros(grid.cells[0]))
    ctx.tracker.record('DS001', closed_gap < BORN_TOLERANCE and closed_visibility == 0.0,
                       value=closed_gap, threshold=BORN_TOLERANCE)

    y = grid.centers(0)
    z = grid.centers(1)
    far_a, far_b = psi_a[:, -1], psi_b[:, -1]
    vis = visibility(far_a, far_b)
    screen = z[-1] - geometry.slit_z
    expected_spacing = geometry.lambda_eff * screen / geometry.separation
    measured_spacing = fringe_spacing(y, far_a, far_b, float(cfg.param('fringe_window', 2.0)))
    if closed is None:
        threshold = float(cfg.param('visibility_threshold', 0.5))
        ctx.tracker.record('DS002', vis > threshold, value=vis, threshold=threshold)
        spacing_ok = (measured_spacing is not None
                      and abs(measured_spacing - expected_spacing) <= SPACING_TOLERANCE * expected_spacing)
        ctx.tracker.record('DS003', spacing_ok, value=measured_spacing, threshold=expected_spacing, notes=phase_name)

    midline = np.abs(y) <= 0.5 * geometry.separation
    count_a = float(np.sum(n2_a.counts[midline, -1]))
    count_b = float(np.sum(n2_b.counts[midline, -1]))
    symmetry_gap = abs(count_a - count_b)
    symmetry_tolerance = 4.0 * np.sqrt(count_a + count_b)
    ctx.tracker.record('DS004', symmetry_gap <= symmetry_tolerance, value=symmetry_gap,
                       threshold=symmetry_tolerance)

    instants = int(cfg.param('internal_instants', 8))
    if instants < 2:
        raise GeometryError(f"internal_instants must be at least 2, got {instants}")
    molecules = max(1, count // instants)
    centers = two_time_centers(geometry, molecules, instants, plan.settings.T, cfg.seed)
    log.info(f"Two-time run: {molecules:,} molecules x {instants} internal-time instants...")
    paths_hr = fly(slit_ensemble(cfg, centers, geometry, plan, 'two-time'), plan, grid)
    n2_hr = density_from_worldlines(paths_hr, grid)
    through_a = float(np.mean(centers == center_a))
    hr_density = n2_hr.values / n2_hr.N
    l1_gap = float(np.sum(np.abs(hr_density - np.abs(superposed) ** 2)) * grid.cell_volume)
    ctx.tracker.record('DS005', None, value=l1_gap, notes='two-time marginal vs superposition')

    Y, Z = grid.mesh()
    field_df = pd.DataFrame({
        'y': Y.ravel(),
        'z': Z.ravel(),
        'density_a': np.abs(psi_a).ravel() ** 2,
        'density_b': np.abs(psi_b).ravel() ** 2,
        'superposed': np.abs(superposed).ravel() ** 2,
        'two_time': hr_density.ravel(),
    })
    cross, incoherent = interference_profile(far_a, far_b)
    far_df = pd.DataFrame({
        'y': y,
        'density_a': np.abs(far_a) ** 2,
        'density_b': np.abs(far_b) ** 2,
        'superposed': np.abs(superposed[:, -1]) ** 2,
        'two_time': hr_density[:, -1],
        'interference': cross,
        'incoherent': incoherent,
    })
    ctx.writer.write_table(field_df, 'double_slit_density')
    ctx.writer.write_table(far_df, 'double_slit_far_line')

    report = {
        'scenario': 'double-slit',
        'phase_model': phase_name,
        'closed_slit': closed,
        'molecules_per_slit': count,
        'geometry': {'separation': geometry.separation, 'width': geometry.width,
                     'slit_z': geometry.slit_z, 'lambda_eff': geometry.lambda_eff, 'screen_distance': screen},
        'visibility': vis,
        'fringe_spacing': {'measured': measured_spacing, 'expected': expected_spacing},
        'born_residuals': {'A': list(born[0]), 'B': list(born[1])},
        'midline_counts': {'A': count_a, 'B': count_b},
        'two_time_l1_gap': l1_gap,
        'two_time': {'molecules': molecules, 'internal_instants': instants, 'fraction_through_a': through_a},
        'flight': {'speed': plan.speed, 'slope_sigma': plan.slope_sigma, 'steps': plan.steps, 'cycles': plan.cycles,
                   'settings': plan.settings.describe()},
    }
    ctx.writer.write_report(report, 'double_slit_report')
    log.info(f"Visibility {vis:.3f} | fringe spacing {measured_spacing} (expected {expected_spacing:.4f})")
    return report
