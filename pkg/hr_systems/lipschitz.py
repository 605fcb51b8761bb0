"""1-Lipschitz / matter decomposition of Hamiltonians and the gravity Lipschitz coefficient.

Hamiltonians here are vectorised callables on phase vectors z = (u, p) of
shape (rows, dim); distances are l1 over all coordinates.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import constants

from .concentration import empirical_lipschitz, l1_distance
from .errors import DomainError, ProfileError
from .rng import stream

log = logging.getLogger(__name__)

Hamiltonian = Callable[[np.ndarray], np.ndarray]

MIN_CERTIFICATE_PAIRS = 10_000
CERTIFICATE_TOLERANCE = 1e-9
AXIS_STEP = 1e-3


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if lower.shape != upper.shape or np.any(upper < lower):
            raise DomainError("box needs matching bounds with upper >= lower")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @classmethod
    def cube(cls, dim: int, half_width: float, center: Union[float, Sequence[float]] = 0.0) -> 'Box':
        center = np.broadcast_to(np.asarray(center, dtype=float), (dim,))
        return cls(center - half_width, center + half_width)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def scaled(self, factor: float) -> 'Box':
        half = 0.5 * (self.upper - self.lower) * factor
        return Box(self.center - half, self.center + half)

    def project(self, z: np.ndarray) -> np.ndarray:
        return np.clip(z, self.lower, self.upper)

    def contains(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        return np.all((z >= self.lower) & (z <= self.upper), axis=-1)

    def distance(self, z: np.ndarray) -> np.ndarray:
        """l1 distance to the projection onto the box."""
        z = np.atleast_2d(z)
        return l1_distance(z, self.project(z))

    def sample(self, count: int, seed: int, key: str = 'box') -> np.ndarray:
        unit = stream(seed, key).uniform(0.0, 1.0, size=(count, self.dim))
        return self.lower + unit * (self.upper - self.lower)

    def describe(self) -> Dict:
        return {'lower': self.lower.tolist(), 'upper': self.upper.tolist()}


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LipschitzCertificate:
    estimate: float
    normalization: float
    pairs: int
    skipped: int
    tolerance: float = CERTIFICATE_TOLERANCE

    @property
    def normalized_estimate(self) -> float:
        return self.estimate / self.normalization

    @property
    def passed(self) -> bool:
        return self.estimate <= 1.0 + self.tolerance

    def to_dict(self) -> Dict:
        return {
            'estimate': self.estimate,
            'normalization': self.normalization,
            'normalized_estimate': self.normalized_estimate,
            'pairs': self.pairs,
            'skipped': self.skipped,
            'passed': self.passed,
        }


def certification_pairs(K: Box, count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Half random pairs in K, half short axis-aligned pairs that resolve partial slopes."""
    n_random = count // 2
    n_axis = count - n_random
    A = K.sample(n_random, seed, 'certify-a')
    B = K.sample(n_random, seed, 'certify-b')

    rng = stream(seed, 'certify-axis')
    base = K.sample(n_axis, seed, 'certify-base')
    axes = rng.integers(0, K.dim, size=n_axis)
    rows = np.arange(n_axis)
    step = AXIS_STEP * np.maximum(K.upper - K.lower, 1e-12)[axes]
    direction = np.where(base[rows, axes] + step <= K.upper[axes], 1.0, -1.0)
    shifted = base.copy()
    shifted[rows, axes] += direction * step
    return np.vstack([A, base]), np.vstack([B, shifted])


def certify_lipschitz_on_compact(H: Hamiltonian, K: Box, samples: int = MIN_CERTIFICATE_PAIRS,
                                 seed: int = 0) -> LipschitzCertificate:
    """Empirical l1 Lipschitz estimate of H on K plus the normalisation M = max(1/2, estimate)."""
    if samples < MIN_CERTIFICATE_PAIRS:
        raise DomainError(f"certification needs at least {MIN_CERTIFICATE_PAIRS} pairs, got {samples}")
    A, B = certification_pairs(K, samples, seed)
    values = np.asarray(H(A), dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError("Hamiltonian is not finite inside the box")
    result = empirical_lipschitz(H, (A, B), l1_distance)
    return LipschitzCertificate(
        estimate=result.estimate,
        normalization=max(0.5, result.estimate),
        pairs=result.used,
        skipped=result.skipped,
    )


def normalized(H: Hamiltonian, factor: float) -> Hamiltonian:
    def scaled(z: np.ndarray) -> np.ndarray:
        return np.asarray(H(z), dtype=float) / factor
    return scaled


# ---------------------------------------------------------------------------
# Radial decomposition
# ---------------------------------------------------------------------------

PROFILE_FAMILIES = {
    'reciprocal': lambda s, s0: 1.0 / (1.0 + s / s0),
    'exponential': lambda s, s0: np.exp(-s / s0),
    'constant': lambda s, s0: np.ones_like(np.asarray(s, dtype=float)),
}


@dataclass(frozen=True)
class RadialProfile:
    name: str = 'reciprocal'
    s0: float = 1.0
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.func is None and self.name not in PROFILE_FAMILIES:
            raise ProfileError(f"unknown radial profile '{self.name}', choose from {sorted(PROFILE_FAMILIES)}")
        if not self.s0 > 0:
            raise ProfileError(f"profile scale must be positive, got {self.s0}")
        grid = np.linspace(0.0, 100.0 * self.s0, 2001)
        values = np.asarray(self(grid), dtype=float)
        if abs(values[0] - 1.0) > 1e-12:
            raise ProfileError(f"profile must satisfy R(0) = 1, got {values[0]}")
        if np.any(values <= 0) or np.any(np.diff(values) > 1e-15):
            raise ProfileError(f"profile '{self.name}' is not positive and nonincreasing")

    def __call__(self, s: np.ndarray) -> np.ndarray:
        if self.func is not None:
            return np.asarray(self.func(np.asarray(s, dtype=float)), dtype=float)
        return PROFILE_FAMILIES[self.name](np.asarray(s, dtype=float), self.s0)

    def describe(self) -> Dict:
        return {'name': self.name if self.func is None else 'custom', 's0': self.s0}


@dataclass
class Decomposition:
    lipschitz_part: Hamiltonian
    matter_part: Hamiltonian
    K: Box
    R_profile: RadialProfile
    lipschitz_constant_estimate: float = field(default=math.nan)

    def to_dict(self) -> Dict:
        return {
            'box': self.K.describe(),
            'profile': self.R_profile.describe(),
            'lipschitz_constant_estimate': self.lipschitz_constant_estimate,
        }


def radial_decompose(H: Hamiltonian, K: Box, R_profile: Union[str, RadialProfile] = 'reciprocal',
                     s0: float = 1.0, estimate_pairs: int = MIN_CERTIFICATE_PAIRS,
                     seed: int = 0) -> Decomposition:
    """H = R(dist(z, K)) H(proj_K z) + matter part; the matter part vanishes on K."""
    profile = R_profile if isinstance(R_profile, RadialProfile) else RadialProfile(R_profile, s0)

    def lipschitz_part(z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return profile(K.distance(z)) * np.asarray(H(K.project(z)), dtype=float)

    def matter_part(z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return np.asarray(H(z), dtype=float) - lipschitz_part(z)

    certificate = certify_lipschitz_on_compact(lipschitz_part, K, estimate_pairs, seed)
    return Decomposition(lipschitz_part, matter_part, K, profile, certificate.estimate)


def decomposition_residual(H: Hamiltonian, dec: Decomposition, test_points: np.ndarray) -> float:
    test_points = np.atleast_2d(np.asarray(test_points, dtype=float))
    if test_points.shape[0] == 0:
        raise DomainError("test point set is empty")
    reconstructed = dec.lipschitz_part(test_points) + dec.matter_part(test_points)
    return float(np.max(np.abs(np.asarray(H(test_points), dtype=float) - reconstructed)))


def calibrate_profile_scale(H: Hamiltonian, K: Box, s0_grid: Sequence[float],
                            profile: str = 'reciprocal', margin: float = 2.0,
                            pairs: int = MIN_CERTIFICATE_PAIRS, seed: int = 0) -> Tuple[Optional[float], pd.DataFrame]:
    """Smallest s0 whose Lipschitz part certifies on the margin box ``margin * K``."""
    outer = K.scaled(margin)
    rows = []
    best = None
    for s0 in sorted(s0_grid):
        dec = radial_decompose(H, K, RadialProfile(profile, s0), estimate_pairs=pairs, seed=seed)
        certificate = certify_lipschitz_on_compact(dec.lipschitz_part, outer, pairs, seed)
        rows.append({'s0': s0, 'estimate': certificate.estimate, 'passed': certificate.passed})
        if best is None and certificate.passed:
            best = s0
    if best is None:
        log.warning(f"no profile scale in {list(s0_grid)} certifies on the {margin}x box")
    return best, pd.DataFrame(rows, columns=['s0', 'estimate', 'passed'])


# ---------------------------------------------------------------------------
# Newtonian gravity
# ---------------------------------------------------------------------------

def planck_units() -> Dict[str, float]:
    hbar, G, c = constants.hbar, constants.G, constants.c
    m_P = math.sqrt(hbar * c / G)
    l_P = math.sqrt(hbar * G / c**3)
    return {'m_P': m_P, 'l_P': l_P, 'D_p': m_P / l_P**3, 'E_p': m_P * c**2}


def newton_alpha_ratios(lam: float, D_ratio: float, E_ratio: float) -> float:
    """(1 + lambda) / lambda^3 * (D / D_p) * (E / E_p)."""
    if not (lam > 0 and D_ratio > 0 and E_ratio > 0):
        raise DomainError(f"inputs must be positive (lambda={lam}, D/D_p={D_ratio}, E/E_p={E_ratio})")
    return (1.0 + lam) / lam**3 * D_ratio * E_ratio


@dataclass(frozen=True)
class NewtonAlpha:
    alpha: float
    alpha_general: float
    D_ratio: float
    E_ratio: float
    lam: float

    def to_dict(self) -> Dict:
        return {'alpha': self.alpha, 'alpha_general': self.alpha_general,
                'D_ratio': self.D_ratio, 'E_ratio': self.E_ratio, 'lambda': self.lam}


def newton_alpha_general(m: float, M_big: float, r1: float, r2: float) -> float:
    """l_P G^2 m M (r1 + r2) / (c^4 r1^2 r2^2)."""
    if min(m, M_big, r1, r2) <= 0:
        raise DomainError("masses and distances must be positive")
    G, c = constants.G, constants.c
    return planck_units()['l_P'] * G**2 * m * M_big * (r1 + r2) / (c**4 * r1**2 * r2**2)


def newton_alpha(m: float, M_big: float, r: float, lam: float = 1.0) -> NewtonAlpha:
    """Lipschitz coefficient of the Newtonian interaction in SI units.

    The compact form uses the equal-mass simplification D = m / r^3, E = m c^2.
    The general form with r1 = lambda r, r2 = r differs from it by a factor lambda.
    """
    if min(m, M_big, r, lam) <= 0:
        raise DomainError(f"inputs must be positive (m={m}, M={M_big}, r={r}, lambda={lam})")
    planck = planck_units()
    D_ratio = (m / r**3) / planck['D_p']
    E_ratio = (m * constants.c**2) / planck['E_p']
    return NewtonAlpha(
        alpha=newton_alpha_ratios(lam, D_ratio, E_ratio),
        alpha_general=newton_alpha_general(m, M_big, lam * r, r),
        D_ratio=D_ratio,
        E_ratio=E_ratio,
        lam=lam,
    )


def newton_alpha_sweep(masses: Sequence[float], radii: Sequence[float], lam: float = 1.0) -> pd.DataFrame:
    rows = []
    for m in masses:
        for r in radii:
            result = newton_alpha(m, m, r, lam)
            rows.append({'m': m, 'r': r, 'lambda': lam, 'alpha': result.alpha,
                         'alpha_general': result.alpha_general})
    return pd.DataFrame(rows, columns=['m', 'r', 'lambda', 'alpha', 'alpha_general'])
