"""Concentration of measure: Levy means, empirical tails, closed-form bounds, collapse metrics."""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DomainError
from .ensemble import CycleRecord
from .rng import CHUNK_SIZE, chunk_bounds, parallel_map, stream

log = logging.getLogger(__name__)

MIN_SAMPLES = 1000
SPHERE_CONSTANT = math.sqrt(math.pi / 2.0)
SPHERE_PRINTED_CONSTANT = math.sqrt(math.pi / 8.0)
BOUND_KINDS = ('sphere', 'sphere_linear', 'gaussian', 'general', 'hr_scale')


def levy_mean(samples: Sequence[float]) -> float:
    """Median, midpoint of the central order statistics for even counts."""
    values = np.asarray(samples, dtype=float).ravel()
    if values.size == 0:
        raise DomainError("levy_mean of an empty sample")
    return float(np.median(values))


# ---------------------------------------------------------------------------
# Chunked samplers
# ---------------------------------------------------------------------------

class ChunkedSampler:
    """Draws ``count`` points in fixed-size chunks, one counter-based stream per chunk."""

    name = 'sampler'

    def __init__(self, dim: int, count: int, seed: int, chunk_size: int = CHUNK_SIZE):
        if dim < 1 or count < 1:
            raise DomainError(f"sampler needs dim >= 1 and count >= 1 (dim={dim}, count={count})")
        self.dim = dim
        self.count = count
        self.seed = seed
        self.chunk_size = chunk_size

    def _chunk(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def chunk(self, index: int, rows: range) -> np.ndarray:
        return self._chunk(stream(self.seed, self.name, index), len(rows))

    def iter_chunks(self) -> Iterator[np.ndarray]:
        for index, rows in enumerate(chunk_bounds(self.count, self.chunk_size)):
            yield self.chunk(index, rows)

    def map_chunks(self, func: Callable[[np.ndarray], np.ndarray], threads: int = 1) -> np.ndarray:
        jobs = list(enumerate(chunk_bounds(self.count, self.chunk_size)))
        parts = parallel_map(lambda job: np.asarray(func(self.chunk(*job)), dtype=float), jobs, threads)
        return np.concatenate(parts)

    def draw(self) -> np.ndarray:
        return np.concatenate(list(self.iter_chunks()), axis=0)

    def describe(self) -> Dict:
        return {'sampler': self.name, 'dim': self.dim, 'count': self.count, 'seed': self.seed}


class SphereSampler(ChunkedSampler):
    """Uniform measure on S^dim in R^(dim + 1) via normalised Gaussians."""
    name = 'sphere'

    def _chunk(self, rng, size):
        g = rng.standard_normal((size, self.dim + 1))
        return g / np.linalg.norm(g, axis=1, keepdims=True)


class GaussianSampler(ChunkedSampler):
    name = 'gaussian'

    def __init__(self, dim: int, count: int, seed: int, scale: float = 1.0, chunk_size: int = CHUNK_SIZE):
        super().__init__(dim, count, seed, chunk_size)
        self.scale = scale

    def _chunk(self, rng, size):
        return self.scale * rng.standard_normal((size, self.dim))


class UniformBoxSampler(ChunkedSampler):
    name = 'uniform_box'

    def __init__(self, dim: int, count: int, seed: int, lower: float = 0.0, upper: float = 1.0,
                 chunk_size: int = CHUNK_SIZE):
        super().__init__(dim, count, seed, chunk_size)
        self.lower = lower
        self.upper = upper

    def _chunk(self, rng, size):
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))


def sample_sphere(dim: int, count: int, seed: int) -> np.ndarray:
    """``count`` uniform points on S^dim, shape (count, dim + 1)."""
    return SphereSampler(dim, count, seed).draw()


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

def bound(kind: str, **params) -> float:
    """Closed-form concentration bounds.

    sphere         N, eps      sqrt(pi/2) exp(-eps^2 (N - 1) / 2), N the ambient dimension
    sphere_linear  N, eps, C   C exp(-(N - 1) eps / 2)
    gaussian       rho, rho_P  1/2 exp(-rho^2 / (2 rho_P^2))
    general        rho, rho_P, C1, C2
    hr_scale       N           1/2 exp(-32 N^2)
    """
    if kind in ('sphere', 'sphere_linear'):
        N, eps = params['N'], params['eps']
        if N < 2 or not 0.0 < eps < 1.0:
            raise DomainError(f"{kind} bound needs N >= 2 and eps in (0, 1), got N={N}, eps={eps}")
        if kind == 'sphere':
            return SPHERE_CONSTANT * math.exp(-eps**2 * (N - 1) / 2.0)
        return params.get('C', 1.0) * math.exp(-(N - 1) * eps / 2.0)
    if kind in ('gaussian', 'general'):
        rho, rho_P = params['rho'], params.get('rho_P', 1.0)
        if not (rho > 0 and rho_P > 0):
            raise DomainError(f"{kind} bound needs rho, rho_P > 0, got rho={rho}, rho_P={rho_P}")
        if kind == 'gaussian':
            return 0.5 * math.exp(-rho**2 / (2.0 * rho_P**2))
        return params.get('C1', 1.0) * math.exp(-params.get('C2', 1.0) * rho**2 / (2.0 * rho_P**2))
    if kind == 'hr_scale':
        N = params['N']
        if N < 1:
            raise DomainError(f"hr_scale bound needs N >= 1, got {N}")
        return 0.5 * math.exp(-32.0 * N**2)
    raise DomainError(f"unknown bound kind '{kind}', choose from {BOUND_KINDS}")


def quantum_scale_ratio(N: int) -> float:
    """rho / rho_P = N at the quantum scale."""
    return float(N)


# ---------------------------------------------------------------------------
# Empirical concentration
# ---------------------------------------------------------------------------

@dataclass
class ConcentrationReport:
    rho_grid: np.ndarray
    empirical: np.ndarray
    bound: np.ndarray
    levy_mean: float
    sigma_f: float
    samples: int
    margin: np.ndarray = field(init=False)
    passed: np.ndarray = field(init=False)
    notes: Dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.clip(self.bound, 0.0, 1.0)
        self.margin = 3.0 * np.sqrt(p * (1.0 - p) / self.samples)
        self.passed = self.empirical <= self.bound + self.margin

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'rho': self.rho_grid,
            'empirical': self.empirical,
            'bound': self.bound,
            'pass': self.passed,
        })

    def to_dict(self) -> Dict:
        return {
            'rho_grid': self.rho_grid.tolist(),
            'empirical': self.empirical.tolist(),
            'bound': self.bound.tolist(),
            'margin': self.margin.tolist(),
            'pass': [bool(v) for v in self.passed],
            'levy_mean': self.levy_mean,
            'sigma_f': self.sigma_f,
            'samples': self.samples,
            'notes': self.notes,
        }


def empirical_concentration(f: Callable[[np.ndarray], np.ndarray], sampler: ChunkedSampler,
                            rho_grid: Sequence[float],
                            bound_fn: Optional[Callable[[float], float]] = None,
                            sigma_f: float = 1.0, threads: int = 1) -> ConcentrationReport:
    """Fraction of samples with |f - M_f| > rho * sigma_f for each rho.

    ``f`` is applied chunk by chunk to arrays of shape (rows, dim).
    """
    values = sampler.map_chunks(f, threads)
    if values.size < MIN_SAMPLES:
        raise DomainError(f"empirical_concentration needs at least {MIN_SAMPLES} samples, got {values.size}")
    rho = np.asarray(rho_grid, dtype=float)
    center = levy_mean(values)
    deviation = np.sort(np.abs(values - center))
    # count of deviations strictly above each threshold
    above = values.size - np.searchsorted(deviation, rho * sigma_f, side='right')
    empirical = above / values.size
    if bound_fn is None:
        bounds = np.ones_like(rho)
        notes = {'bound_kind': 'trivial'}
    else:
        bounds = np.array([bound_fn(r) for r in rho], dtype=float)
        notes = {}
    report = ConcentrationReport(rho, empirical, bounds, center, sigma_f, int(values.size), notes=notes)
    log.debug(f"empirical_concentration: {values.size} samples, median {center:.6g}")
    return report


@dataclass(frozen=True)
class LipschitzEstimate:
    estimate: float
    used: int
    skipped: int

    def __float__(self) -> float:
        return self.estimate


def euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a - b, axis=-1)


def l1_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(a - b), axis=-1)


def empirical_lipschitz(f: Callable[[np.ndarray], np.ndarray],
                        pairs: Union[Tuple[np.ndarray, np.ndarray], Sequence[Tuple[np.ndarray, np.ndarray]]],
                        metric: Callable[[np.ndarray, np.ndarray], np.ndarray] = euclidean) -> LipschitzEstimate:
    """max |f(a) - f(b)| / dist(a, b) over pairs; coincident pairs are skipped."""
    if isinstance(pairs, tuple) and len(pairs) == 2 and np.ndim(pairs[0]) == 2:
        A, B = (np.asarray(x, dtype=float) for x in pairs)
    else:
        A = np.array([np.asarray(a, dtype=float) for a, _ in pairs])
        B = np.array([np.asarray(b, dtype=float) for _, b in pairs])
    dist = np.asarray(metric(A, B), dtype=float)
    distinct = dist > 0
    skipped = int(np.sum(~distinct))
    if skipped:
        log.warning(f"empirical_lipschitz: skipped {skipped} coincident pairs")
    if not np.any(distinct):
        return LipschitzEstimate(0.0, 0, skipped)
    fa = np.asarray(f(A[distinct]), dtype=float)
    fb = np.asarray(f(B[distinct]), dtype=float)
    ratios = np.abs(fa - fb) / dist[distinct]
    return LipschitzEstimate(float(np.max(ratios)), int(np.sum(distinct)), skipped)


# ---------------------------------------------------------------------------
# Collapse detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollapseReport:
    cycle: int
    phase_variance: Dict[str, Dict[str, float]]
    ergodic_variance: float
    contracted_variance: float
    variance_ratio: float
    spread: float
    sigma_f: float
    spread_ratio: float
    threshold: float
    collapsed: bool
    scale_ratio: float
    hr_bound: float

    def to_dict(self) -> Dict:
        return asdict(self)


def collapse_metrics(record: CycleRecord, sigma_f: float, threshold: float = 1.0) -> CollapseReport:
    """Per-phase variance and the collapse flag: spread / sigma_f < threshold."""
    if not sigma_f > 0:
        raise DomainError(f"sigma_f must be positive, got {sigma_f}")
    ergodic = record.phase_indices('ergodic')
    contractive = record.phase_indices('contractive')
    N = record.positions.shape[1]
    ergodic_variance = float(record.variances[ergodic[-1]]) if ergodic.size else math.nan
    if contractive.size and record.contraction_enabled:
        contracted = float(record.variances[contractive[-1]])
    else:
        contracted = float(record.variances[record.end_of_contraction()])
    spread = math.sqrt(contracted)
    ratio = contracted / ergodic_variance if ergodic_variance > 0 else math.nan
    collapsed = bool(record.contraction_enabled and contractive.size and spread / sigma_f < threshold)
    return CollapseReport(
        cycle=record.cycle_index,
        phase_variance=record.phase_variance(),
        ergodic_variance=ergodic_variance,
        contracted_variance=contracted,
        variance_ratio=ratio,
        spread=spread,
        sigma_f=sigma_f,
        spread_ratio=spread / sigma_f,
        threshold=threshold,
        collapsed=collapsed,
        scale_ratio=quantum_scale_ratio(N),
        hr_bound=bound('hr_scale', N=N),
    )
