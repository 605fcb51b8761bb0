"""The internal U_t flow: kappa schedules, deformation, time inversion and H_t."""
import logging
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import ConeDomainError, DomainError, ProfileError, ScheduleDomainError
from .geometry import PhasePoint, RandersStructure, hr_value, x_sector_mask

log = logging.getLogger(__name__)

# profile name -> (kappa(s), antiderivative A(s)) on s = t/T in [0, 1]
PROFILES: Dict[str, Tuple[Callable[[float], float], Callable[[float], float]]] = {
    'smoothstep': (lambda s: 3.0 * s**2 - 2.0 * s**3,
                   lambda s: s**3 - 0.5 * s**4),
    'linear': (lambda s: s,
               lambda s: 0.5 * s**2),
    'cosine': (lambda s: 0.5 * (1.0 - np.cos(np.pi * s)),
               lambda s: 0.5 * s - np.sin(np.pi * s) / (2.0 * np.pi)),
}


@dataclass(frozen=True)
class KappaSchedule:
    T: float
    profile: str = 'smoothstep'

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"semi-period must be positive, got {self.T}")
        if self.profile not in PROFILES:
            raise ProfileError(f"unknown kappa profile '{self.profile}', choose from {sorted(PROFILES)}")

    def _check(self, t: float) -> float:
        t = float(t)
        if not 0.0 <= t <= self.T:
            raise ScheduleDomainError(f"t = {t} outside [0, {self.T}]")
        return t

    def kappa(self, t: float) -> float:
        t = self._check(t)
        if t == 0.0:
            return 0.0
        if t == self.T:
            return 1.0
        value = float(PROFILES[self.profile][0](t / self.T))
        return min(1.0, max(0.0, value))

    def integral(self, t0: float, t1: float) -> float:
        """Exact integral of kappa over [t0, t1]."""
        t0, t1 = self._check(t0), self._check(t1)
        antiderivative = PROFILES[self.profile][1]
        return self.T * float(antiderivative(t1 / self.T) - antiderivative(t0 / self.T))


@dataclass(frozen=True)
class HullMember:
    """Structure whose fundamental tensor is t1 * g + (1 - t1) * h."""
    structure: RandersStructure
    h: np.ndarray
    t1: float

    def __post_init__(self):
        if not 0.0 <= self.t1 <= 1.0:
            raise DomainError(f"hull weight must lie in [0, 1], got {self.t1}")

    def squared_norm(self, pt: PhasePoint) -> float:
        F = hr_value(self.structure, pt)
        return self.t1 * F * F + (1.0 - self.t1) * float(pt.p @ self.h @ pt.p)


def _squared_norm(s, pt: PhasePoint) -> float:
    if hasattr(s, 'squared_norm'):
        return float(s.squared_norm(pt))
    F = hr_value(s, pt)
    return F * F


def _h_value(h: np.ndarray, pt: PhasePoint) -> float:
    return float(pt.p @ h @ pt.p)


def ut_deform(s, h: np.ndarray, sched: KappaSchedule, t: float, pt: PhasePoint) -> float:
    """F_t = sqrt(kappa |h(p, p)| + (1 - kappa) |F^2|)."""
    k = sched.kappa(t)
    return float(np.sqrt(k * abs(_h_value(h, pt)) + (1.0 - k) * abs(_squared_norm(s, pt))))


def t_inversion(pt: PhasePoint) -> PhasePoint:
    """(x, y, p_x, p_y) -> (x, -y, -p_x, p_y)."""
    mask = x_sector_mask(pt.d, pt.N)
    u = np.where(mask, pt.u, -pt.u)
    p = np.where(mask, -pt.p, pt.p)
    return PhasePoint(u, p, pt.d)


def _reflected_hr_value(s: RandersStructure, pt: PhasePoint) -> float:
    """F at (T u, T* p) with the drift transported oddly, beta(T u) . T* p = -beta(u) . p."""
    reflected = t_inversion(pt)
    a2 = float(reflected.p @ s.eta @ reflected.p)
    if a2 < 0.0:
        raise ConeDomainError("time-inverted momentum leaves the timelike cone")
    return float(np.sqrt(a2) - s.beta(pt.u) @ pt.p)


def ht_classical(s: RandersStructure, h: np.ndarray, sched: KappaSchedule, t: float, pt: PhasePoint) -> float:
    """H_t = 1/2 F_t(u, p) - 1/2 F_t(T u, T* p) with the linear kappa blend.

    The averaged term is contracted with p on both sides and cancels; with
    eta even under the inversion the result is (1 - kappa) * beta(u) . p.
    """
    k = sched.kappa(t)
    averaged = k * np.sqrt(abs(_h_value(h, pt)))
    forward = (1.0 - k) * hr_value(s, pt) + averaged
    backward = (1.0 - k) * _reflected_hr_value(s, pt) + averaged
    return float(0.5 * forward - 0.5 * backward)


def metastable_residual(s: RandersStructure, h: np.ndarray, sched: KappaSchedule,
                        test_points: Sequence[PhasePoint], t: float) -> float:
    if len(test_points) == 0:
        raise DomainError("test point set is empty")
    return max(abs(ht_classical(s, h, sched, t, pt)) for pt in test_points)


@dataclass(frozen=True)
class FlowSnapshot:
    t: float
    evaluator: Callable[[PhasePoint], float]
    residual: float


def snapshot(s: RandersStructure, h: np.ndarray, sched: KappaSchedule, t: float,
             test_points: Sequence[PhasePoint]) -> FlowSnapshot:
    residual = metastable_residual(s, h, sched, test_points, t)
    return FlowSnapshot(t=float(t), evaluator=partial(ut_deform, s, h, sched, t), residual=residual)


def residual_sweep(s: RandersStructure, h: np.ndarray, sched: KappaSchedule,
                   test_points: Sequence[PhasePoint], n_points: int = 21) -> pd.DataFrame:
    rows = []
    for t in np.linspace(0.0, sched.T, n_points):
        t = min(float(t), sched.T)
        rows.append({'t': t, 'kappa': sched.kappa(t), 'residual': metastable_residual(s, h, sched, test_points, t)})
    return pd.DataFrame(rows, columns=['t', 'kappa', 'residual'])


@dataclass(frozen=True)
class CommutationReport:
    max_discrepancy: float
    evaluations: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_discrepancy < self.tolerance


def commutation_check(s: RandersStructure, h: np.ndarray, sched: KappaSchedule,
                      test_points: Sequence[PhasePoint], t_grid: Optional[Iterable[float]] = None,
                      kappa_fn: Optional[Callable[[float, PhasePoint], float]] = None,
                      tolerance: float = 1e-10) -> CommutationReport:
    """Compare deforming then reflecting with reflecting then deforming.

    ``kappa_fn(t, pt)`` overrides the schedule with a phase-space dependent
    kappa; without it kappa is T-invariant and the two orders agree.
    """
    if t_grid is None:
        t_grid = np.linspace(0.0, sched.T, 5)
    kappa_at = kappa_fn or (lambda t, pt: sched.kappa(t))
    worst = 0.0
    count = 0
    for t in t_grid:
        t = min(float(t), sched.T)
        for pt in test_points:
            reflected = t_inversion(pt)
            F2 = _squared_norm(s, reflected)
            h_reflected = abs(_h_value(h, reflected))
            k_reflected = kappa_at(t, reflected)
            k_here = kappa_at(t, pt)
            deform_then_reflect = np.sqrt(k_reflected * h_reflected + (1.0 - k_reflected) * abs(F2))
            reflect_then_deform = np.sqrt(k_here * h_reflected + (1.0 - k_here) * abs(F2))
            worst = max(worst, abs(deform_then_reflect - reflect_then_deform))
            count += 1
    log.debug(f"commutation_check: {count} evaluations, max discrepancy {worst:.3e}")
    return CommutationReport(max_discrepancy=float(worst), evaluations=count, tolerance=tolerance)


def interaction_class(sched: KappaSchedule) -> str:
    """'classical' when most of the schedule weight sits in the late half of [0, T]."""
    late = sched.integral(0.5 * sched.T, sched.T)
    total = sched.integral(0.0, sched.T)
    return 'classical' if late >= 0.5 * total else 'quantum'
