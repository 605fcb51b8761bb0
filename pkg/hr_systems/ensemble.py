"""Molecule ensembles over the two-time lattice, world-line densities and emergent wave functions.

A fundamental cycle spans internal time [0, 2T]:

    ergodic      [0, f_e T)   bounded jitter plus drift
    contractive  [f_e T, T]   exponential attraction to the coordinate-wise median
    expansive    (T, 2T]      jitter re-injected

The external time tau advances by 2T per cycle.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import constants

from .errors import CoverageError, DataCorruptionError, DomainError, ShapeError
from .flow import KappaSchedule
from .geometry import BetaField, PhasePoint
from .rng import parallel_map, stream

log = logging.getLogger(__name__)

PHASES = ('ergodic', 'contractive', 'expansive')
JITTER_LAWS = ('uniform', 'gaussian')


# ---------------------------------------------------------------------------
# Mass / semi-period relations
# ---------------------------------------------------------------------------

def semi_period(M_sys: float, alpha_et: float = 1.0, units: str = 'natural') -> float:
    """T = alpha hbar / (M c^2); ``units`` is 'natural' (hbar = c = 1) or 'si'."""
    if not M_sys > 0:
        raise DomainError(f"system mass must be positive, got {M_sys}")
    if units == 'natural':
        return alpha_et / M_sys
    if units == 'si':
        return alpha_et * constants.hbar / (M_sys * constants.c**2)
    raise DomainError(f"unknown unit system '{units}'")


def correlation_bound(T: Optional[float] = None, c_max: Optional[float] = None,
                      M_sys: Optional[float] = None, alpha_et: float = 1.0,
                      units: str = 'natural') -> float:
    """Maximal correlation distance 2 T c, or 2 alpha hbar / (c M); M = 0 is unbounded."""
    c = c_max if c_max is not None else (constants.c if units == 'si' else 1.0)
    if T is not None:
        if not T > 0:
            raise DomainError(f"semi-period must be positive, got {T}")
        return 2.0 * T * c
    if M_sys is None:
        raise DomainError("correlation_bound needs either T or M_sys")
    if M_sys < 0:
        raise DomainError(f"mass must be non-negative, got {M_sys}")
    if M_sys == 0:
        return math.inf
    hbar = constants.hbar if units == 'si' else 1.0
    return 2.0 * alpha_et * hbar / (c * M_sys)


# ---------------------------------------------------------------------------
# Ensembles and cycles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MoleculeEnsemble:
    """N molecules, each a row (x, y) of length 2d in ``u`` with momenta in ``p``."""
    N: int
    d: int
    u: np.ndarray
    p: np.ndarray
    m: float
    M_sys: float
    T: float
    rng_seed: int
    alpha_et: float = 1.0

    def __post_init__(self):
        if self.N < 1:
            raise DomainError(f"ensemble needs at least one molecule, got N = {self.N}")
        if not self.T > 0:
            raise DomainError(f"semi-period must be positive, got {self.T}")
        if self.M_sys < self.m:
            raise DomainError(f"system mass {self.M_sys} is below the molecule mass {self.m}")
        u = np.asarray(self.u, dtype=float).reshape(self.N, 2 * self.d)
        p = np.asarray(self.p, dtype=float).reshape(self.N, 2 * self.d)
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'p', p)

    @classmethod
    def create(cls, N: int, d: int, seed: int, m: float = 1e-3, M_sys: float = 1.0,
               alpha_et: float = 1.0, center: Optional[Sequence[float]] = None,
               spread: float = 0.5, units: str = 'natural', T: Optional[float] = None) -> 'MoleculeEnsemble':
        T = T if T is not None else semi_period(M_sys, alpha_et, units)
        spatial = d - 1
        center = np.zeros(spatial) if center is None else np.asarray(center, dtype=float)
        rng = stream(seed, 'initial-cloud')
        u = np.zeros((N, 2 * d))
        u[:, 1:d] = center + spread * rng.standard_normal((N, spatial))
        u[:, d] = 1.0
        p = np.zeros((N, 2 * d))
        p[:, 0] = 1.0
        return cls(N=N, d=d, u=u, p=p, m=m, M_sys=M_sys, T=T, rng_seed=seed, alpha_et=alpha_et)

    @property
    def positions(self) -> np.ndarray:
        """Spatial coordinates x^1..x^{d-1}, shape (N, d-1)."""
        return self.u[:, 1:self.d]

    def states(self) -> List[PhasePoint]:
        return [PhasePoint(self.u[k], self.p[k], self.d) for k in range(self.N)]

    def as_phase_point(self) -> PhasePoint:
        return PhasePoint(self.u.ravel(), self.p.ravel(), self.d)

    def with_state(self, u: np.ndarray, p: np.ndarray) -> 'MoleculeEnsemble':
        return MoleculeEnsemble(self.N, self.d, u, p, self.m, self.M_sys, self.T, self.rng_seed, self.alpha_et)

    def recentered(self, target: Sequence[float]) -> 'MoleculeEnsemble':
        """Shift spatial positions so that the coordinate-wise median equals ``target``."""
        u = self.u.copy()
        u[:, 1:self.d] += np.asarray(target, dtype=float) - np.median(self.positions, axis=0)
        return self.with_state(u, self.p)


@dataclass(frozen=True)
class CycleSettings:
    T: float
    kappa_profile: str = 'smoothstep'
    lambda_c: Optional[float] = None
    ergodic_fraction: float = 0.25
    steps_per_semiperiod: int = 40
    jitter: float = 0.02
    jitter_law: str = 'uniform'
    drift_factor: float = 2.0
    c_max: float = 1.0
    contraction: bool = True
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.ergodic_fraction < 1.0:
            raise DomainError(f"ergodic_fraction must lie in (0, 1), got {self.ergodic_fraction}")
        if self.steps_per_semiperiod < 2:
            raise DomainError("steps_per_semiperiod must be at least 2")
        if self.jitter < 0:
            raise DomainError(f"jitter must be non-negative, got {self.jitter}")
        if self.jitter_law not in JITTER_LAWS:
            raise DomainError(f"unknown jitter law '{self.jitter_law}', choose from {JITTER_LAWS}")

    @property
    def schedule(self) -> KappaSchedule:
        return KappaSchedule(self.T, self.kappa_profile)

    @property
    def rate(self) -> float:
        return self.lambda_c if self.lambda_c is not None else 5.0 / self.T

    @property
    def dt(self) -> float:
        return self.T / self.steps_per_semiperiod

    @property
    def ergodic_steps(self) -> int:
        return max(1, int(round(self.ergodic_fraction * self.steps_per_semiperiod)))

    def describe(self) -> Dict:
        return {
            'T': self.T, 'kappa_profile': self.kappa_profile, 'lambda_c': self.rate,
            'ergodic_fraction': self.ergodic_fraction, 'steps_per_semiperiod': self.steps_per_semiperiod,
            'jitter': self.jitter, 'jitter_law': self.jitter_law, 'drift_factor': self.drift_factor,
            'c_max': self.c_max, 'contraction': self.contraction,
        }


@dataclass
class CycleRecord:
    cycle_index: int
    T: float
    spans: Dict[str, Tuple[float, float]]
    times: np.ndarray
    phases: List[str]
    positions: np.ndarray
    final_u: np.ndarray
    final_p: np.ndarray
    contraction_enabled: bool
    variances: np.ndarray = field(init=False)

    def __post_init__(self):
        self.variances = np.sum(np.var(self.positions, axis=1), axis=-1)

    @property
    def tau(self) -> np.ndarray:
        return 2.0 * self.T * self.cycle_index + self.times

    def phase_indices(self, phase: str) -> np.ndarray:
        return np.array([i for i, label in enumerate(self.phases) if label == phase], dtype=int)

    def phase_variance(self) -> Dict[str, Dict[str, float]]:
        summary = {}
        for phase in PHASES:
            idx = self.phase_indices(phase)
            if idx.size:
                summary[phase] = {'start': float(self.variances[idx[0]]), 'end': float(self.variances[idx[-1]])}
        return summary

    def end_of_contraction(self) -> int:
        idx = self.phase_indices('contractive')
        return int(idx[-1]) if idx.size else int(np.searchsorted(self.times, self.T))

    def positions_at(self, t: float) -> np.ndarray:
        index = int(np.argmin(np.abs(self.times - t)))
        return self.positions[index]

    def variance_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'cycle': self.cycle_index,
            't': self.times,
            'tau': self.tau,
            'phase': self.phases,
            'variance': self.variances,
        })


def _clamp_rows(delta: np.ndarray, limit: float) -> np.ndarray:
    norms = np.linalg.norm(delta, axis=1)
    over = norms > limit
    if np.any(over):
        delta = delta.copy()
        delta[over] *= (limit / norms[over])[:, None]
    return delta


def run_cycle(e: MoleculeEnsemble, settings: CycleSettings, beta: Optional[BetaField] = None,
              cycle_index: int = 0) -> CycleRecord:
    """One fundamental cycle; the input ensemble is not modified."""
    d = e.d
    S = settings.steps_per_semiperiod
    dt = settings.dt
    T = settings.T
    schedule = settings.schedule
    s_erg = settings.ergodic_steps
    t_ergodic = s_erg * dt
    active = np.r_[1:d, d + 1:2 * d]
    step_limit = settings.c_max * dt

    u = e.u.copy()
    p = e.p.copy()
    times = [0.0]
    phases = ['ergodic']
    snapshots = [u[:, 1:d].copy()]

    for i in range(2 * S):
        t0, t1 = i * dt, (i + 1) * dt
        phase = 'contractive' if s_erg <= i < S else ('ergodic' if i < s_erg else 'expansive')

        delta = np.zeros_like(u)
        if beta is not None:
            delta += dt * settings.drift_factor * beta(u)
            jac = beta.jacobian(u)
            p = p - dt * settings.drift_factor * np.einsum('nki,nk->ni', jac, p)
        if phase != 'contractive' and settings.jitter > 0 and e.N > 0:
            rng = stream(e.rng_seed, 'jitter', cycle_index, i)
            if settings.jitter_law == 'uniform':
                noise = rng.uniform(-settings.jitter, settings.jitter, size=(e.N, active.size))
            else:
                noise = rng.normal(0.0, settings.jitter / np.sqrt(3.0), size=(e.N, active.size))
            delta[:, active] += noise
        delta[:, :d] = _clamp_rows(delta[:, :d], step_limit)
        u = u + delta

        if phase == 'contractive' and settings.contraction:
            center = np.median(u[:, active], axis=0)
            factor = math.exp(-settings.rate * schedule.integral(max(t0, t_ergodic), min(t1, T)))

            def contract(rows: range) -> None:
                block = u[rows.start:rows.stop, :]
                block[:, active] = center + (block[:, active] - center) * factor

            partitions = [range(a, min(a + 256, e.N)) for a in range(0, e.N, 256)]
            parallel_map(contract, partitions, settings.threads)

        # snapshot after step i carries the phase of step i
        times.append(T if i + 1 == S else (2.0 * T if i + 1 == 2 * S else t1))
        phases.append(phase)
        snapshots.append(u[:, 1:d].copy())

    if not np.all(np.isfinite(u)):
        raise DataCorruptionError(f"non-finite molecule state after cycle {cycle_index}")

    return CycleRecord(
        cycle_index=cycle_index,
        T=T,
        spans={'ergodic': (0.0, t_ergodic), 'contractive': (t_ergodic, T), 'expansive': (T, 2.0 * T)},
        times=np.asarray(times),
        phases=phases,
        positions=np.stack(snapshots),
        final_u=u,
        final_p=p,
        contraction_enabled=settings.contraction,
    )


def run_cycles(e: MoleculeEnsemble, settings: CycleSettings, n_cycles: int,
               beta: Optional[BetaField] = None, start_cycle: int = 0) -> Tuple[List[CycleRecord], MoleculeEnsemble]:
    records = []
    for index in range(start_cycle, start_cycle + n_cycles):
        record = run_cycle(e, settings, beta, index)
        records.append(record)
        e = e.with_state(record.final_u, record.final_p)
        log.debug(f"cycle {index}: variance {record.variances[0]:.4g} -> {record.variances[-1]:.4g}")
    return records, e


# ---------------------------------------------------------------------------
# Grids, densities and wave functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    cells: Tuple[int, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        cells = tuple(int(v) for v in np.atleast_1d(self.cells))
        if not (len(lower) == len(upper) == len(cells)):
            raise ShapeError("grid lower, upper and cells must have the same length")
        if any(hi <= lo for lo, hi in zip(lower, upper)) or any(c < 1 for c in cells):
            raise DomainError("grid needs upper > lower and at least one cell per axis")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        object.__setattr__(self, 'cells', cells)

    @property
    def ndim(self) -> int:
        return len(self.cells)

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / np.asarray(self.cells)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def centers(self, axis: int) -> np.ndarray:
        return self.lower[axis] + (np.arange(self.cells[axis]) + 0.5) * self.spacing[axis]

    def mesh(self) -> List[np.ndarray]:
        return np.meshgrid(*[self.centers(a) for a in range(self.ndim)], indexing='ij')

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Cell index per point, shape (M, ndim); raises CoverageError for escapees."""
        points = np.asarray(points, dtype=float).reshape(-1, self.ndim)
        lower = np.asarray(self.lower)
        upper = np.asarray(self.upper)
        outside = np.any((points < lower) | (points > upper) | ~np.isfinite(points), axis=1)
        if np.any(outside):
            escapees = np.nonzero(outside)[0]
            raise CoverageError(
                f"{escapees.size} points fall outside the grid (first: {escapees[:10].tolist()})",
                escapees=escapees.tolist(),
            )
        index = np.floor((points - lower) / self.spacing).astype(int)
        return np.minimum(index, np.asarray(self.cells) - 1)


@dataclass(frozen=True)
class DensityField:
    grid: GridSpec
    values: np.ndarray
    counts: np.ndarray
    N: int

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)


def density_from_points(points: np.ndarray, grid: GridSpec, N: int) -> DensityField:
    """Histogram of point samples normalised so the field integrates to N."""
    index = grid.locate(points)
    counts = np.zeros(grid.cells, dtype=np.int64)
    np.add.at(counts, tuple(index.T), 1)
    total = int(counts.sum())
    values = counts * (N / total) / grid.cell_volume if total else counts.astype(float)
    return DensityField(grid=grid, values=values, counts=counts, N=N)


def density_from_worldlines(paths: np.ndarray, grid: GridSpec) -> DensityField:
    """World-line density: each line counts once in every cell it passes through.

    ``paths`` has shape (samples, N, ndim).
    """
    samples, N = paths.shape[0], paths.shape[1]
    index = grid.locate(paths.reshape(-1, grid.ndim))
    flat = np.ravel_multi_index(tuple(index.T), grid.cells)
    molecule = np.tile(np.arange(N), samples)
    visits = np.unique(molecule.astype(np.int64) * int(np.prod(grid.cells)) + flat)
    cells = visits % int(np.prod(grid.cells))
    counts = np.bincount(cells, minlength=int(np.prod(grid.cells))).reshape(grid.cells)
    total = int(counts.sum())
    values = counts * (N / total) / grid.cell_volume
    return DensityField(grid=grid, values=values, counts=counts, N=N)


def density_field(records: Sequence[CycleRecord], grid: GridSpec, t: Optional[float] = None) -> DensityField:
    """Density of molecule positions at internal time t (default: end of contraction)."""
    if len(records) == 0:
        raise DomainError("density_field needs at least one cycle record")
    slices = []
    for record in records:
        index = record.end_of_contraction() if t is None else int(np.argmin(np.abs(record.times - t)))
        slices.append(record.positions[index])
    points = np.concatenate(slices, axis=0)
    N = slices[0].shape[0]
    field_ = density_from_points(points, grid, N)
    if len(records) > 1:
        log.debug(f"density_field averaged over {len(records)} cycle records")
    return field_


class PhaseModel:
    name = 'base'

    def phase_field(self, grid: GridSpec) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantPhase(PhaseModel):
    value: float = 0.0
    name = 'constant'

    def phase_field(self, grid):
        return np.full(grid.cells, float(self.value))


@dataclass(frozen=True)
class PlaneWavePhase(PhaseModel):
    """k . x, or |k| |x - source| for a wave leaving an aperture at ``source``."""
    k: Tuple[float, ...]
    source: Optional[Tuple[float, ...]] = None
    name = 'plane_wave'

    def phase_field(self, grid):
        mesh = grid.mesh()
        k = np.broadcast_to(np.asarray(self.k, dtype=float), (grid.ndim,))
        if self.source is None:
            return sum(k[a] * mesh[a] for a in range(grid.ndim))
        distance = np.sqrt(sum((mesh[a] - self.source[a]) ** 2 for a in range(grid.ndim)))
        return float(np.linalg.norm(k)) * distance


@dataclass(frozen=True)
class MoleculePhase(PhaseModel):
    """Random phase per molecule, averaged per cell as a unit phasor."""
    points: np.ndarray
    seed: int
    name = 'molecule'

    def phase_field(self, grid):
        points = np.asarray(self.points, dtype=float).reshape(-1, grid.ndim)
        phases = stream(self.seed, 'molecule-phase').uniform(0.0, 2.0 * np.pi, size=points.shape[0])
        index = grid.locate(points)
        accum = np.zeros(grid.cells, dtype=complex)
        np.add.at(accum, tuple(index.T), np.exp(1j * phases))
        return np.angle(accum)


@dataclass(frozen=True)
class EmergentWaveFunction:
    grid: GridSpec
    amplitude: np.ndarray
    phase: np.ndarray
    norm: float

    def density(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2


def assemble_wavefunction(n2: DensityField, phase_model: PhaseModel) -> EmergentWaveFunction:
    """psi = sqrt(n^2 / N) exp(i theta)."""
    values = np.asarray(n2.values, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values < 0):
        raise DataCorruptionError("density field has negative or non-finite cells")
    total = n2.integral()
    if abs(total - n2.N) > 1e-9 * max(1, n2.N):
        raise DomainError(f"density integrates to {total}, expected N = {n2.N}")
    theta = phase_model.phase_field(n2.grid)
    psi = np.sqrt(values / n2.N) * np.exp(1j * theta)
    norm = float(np.sum(np.abs(psi) ** 2) * n2.grid.cell_volume)
    return EmergentWaveFunction(grid=n2.grid, amplitude=psi, phase=theta, norm=norm)


def inner_product(a: EmergentWaveFunction, b: EmergentWaveFunction) -> complex:
    if a.grid != b.grid or a.amplitude.shape != b.amplitude.shape:
        raise ShapeError("wave functions live on different grids")
    return complex(np.sum(np.conj(a.amplitude) * b.amplitude) * a.grid.cell_volume)


def oscillation_overlap(n2: DensityField, k_values: Sequence[float], axis: int = 0) -> List[float]:
    """|<psi_0 | psi_k>| for relative plane-wave phases of growing wavenumber."""
    base = assemble_wavefunction(n2, ConstantPhase())
    overlaps = []
    for k in k_values:
        vector = np.zeros(n2.grid.ndim)
        vector[axis] = k
        overlaps.append(abs(inner_product(base, assemble_wavefunction(n2, PlaneWavePhase(tuple(vector))))))
    return overlaps


def refinement_sweep(points: np.ndarray, lower: float, upper: float, cell_counts: Sequence[int],
                     reference_pdf: Callable[[np.ndarray], np.ndarray]) -> pd.DataFrame:
    """L1 gap between normalised 1-D densities and a reference pdf as the cell size shrinks."""
    points = np.asarray(points, dtype=float).reshape(-1, 1)
    rows = []
    for cells in cell_counts:
        grid = GridSpec((lower,), (upper,), (cells,))
        density = density_from_points(points, grid, points.shape[0])
        empirical = density.values / density.N
        gap = float(np.sum(np.abs(empirical - reference_pdf(grid.centers(0)))) * grid.cell_volume)
        rows.append({'cells': cells, 'cell_size': float(grid.spacing[0]), 'l1_gap': gap})
    return pd.DataFrame(rows)
