"""Translate a validated RunConfig into hr_systems objects."""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from handlers.cache_manager import CacheManager
from handlers.check_tracker import AcceptanceTracker
from handlers.config_manager import RunConfig
from handlers.output_writer import OutputWriter
from hr_systems.dynamics import KinematicLimits
from hr_systems.ensemble import CycleSettings, GridSpec, MoleculeEnsemble, semi_period
from hr_systems.flow import KappaSchedule
from hr_systems.geometry import (
    BetaField, ConstantBeta, HyperboloidSampler, LinearBeta, LorentzMetric, PhasePoint,
    RandersStructure, SinusoidalBeta,
)
from hr_systems.rng import stream

log = logging.getLogger(__name__)


@dataclass
class ScenarioContext:
    config: RunConfig
    writer: OutputWriter
    tracker: AcceptanceTracker
    cache: Optional[CacheManager] = None

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def threads(self) -> int:
        return self.config.threads


def build_metric(cfg: RunConfig) -> LorentzMetric:
    if cfg.geometry.metric == 'minkowski':
        metric = LorentzMetric.minkowski(cfg.geometry.d)
    else:
        metric = LorentzMetric.constant(cfg.geometry.metric)
    metric.check_signature()
    return metric


def build_beta(cfg: RunConfig) -> BetaField:
    """Per-molecule drift field of length 2d."""
    b = cfg.beta
    n = 2 * cfg.geometry.d
    if b.family == 'constant':
        return ConstantBeta(b.vector if b.vector is not None else np.zeros(n))
    if b.family == 'linear':
        return LinearBeta(b.matrix, b.offset)
    return SinusoidalBeta(b.amplitude, b.wavenumbers, b.phase)


def build_structure(cfg: RunConfig, beta: Optional[BetaField] = None) -> RandersStructure:
    return RandersStructure.build(
        build_metric(cfg),
        beta if beta is not None else build_beta(cfg),
        N=cfg.geometry.N,
        bound_box=cfg.geometry.bound_box,
        seed=cfg.seed,
    )


def resolve_semi_period(cfg: RunConfig) -> float:
    if cfg.flow.T is not None:
        return cfg.flow.T
    e = cfg.ensemble
    return semi_period(e.M_sys, e.alpha_et, e.units)


def build_schedule(cfg: RunConfig) -> KappaSchedule:
    return KappaSchedule(resolve_semi_period(cfg), cfg.flow.kappa_profile)


def build_limits(cfg: RunConfig) -> KinematicLimits:
    return KinematicLimits.from_length(cfg.limits.c_max, cfg.limits.L_min)


def build_sampler(cfg: RunConfig) -> HyperboloidSampler:
    h = cfg.hyperboloid
    return HyperboloidSampler(count=h.count, sigma_b=h.sigma_b, seed=cfg.seed, time_symmetric=h.time_symmetric)


def build_cycle_settings(cfg: RunConfig, **overrides) -> CycleSettings:
    e = cfg.ensemble
    values = dict(
        T=resolve_semi_period(cfg),
        kappa_profile=cfg.flow.kappa_profile,
        lambda_c=cfg.flow.lambda_c,
        ergodic_fraction=e.ergodic_fraction,
        steps_per_semiperiod=e.steps_per_semiperiod,
        jitter=e.jitter,
        jitter_law=e.jitter_law,
        drift_factor=cfg.dynamics.drift_factor,
        c_max=cfg.limits.c_max,
        contraction=e.contraction,
        threads=cfg.threads,
    )
    values.update(overrides)
    return CycleSettings(**values)


def build_ensemble(cfg: RunConfig, N: Optional[int] = None, seed: Optional[int] = None,
                   m: Optional[float] = None) -> MoleculeEnsemble:
    e = cfg.ensemble
    return MoleculeEnsemble.create(
        N=N if N is not None else e.N,
        d=cfg.geometry.d,
        seed=seed if seed is not None else cfg.seed,
        m=m if m is not None else e.m,
        M_sys=e.M_sys,
        alpha_et=e.alpha_et,
        spread=e.spread,
        units=e.units,
        T=resolve_semi_period(cfg),
    )


def build_grid(cfg: RunConfig) -> GridSpec:
    return GridSpec(tuple(cfg.grid.lower), tuple(cfg.grid.upper), tuple(cfg.grid.cells))


def timelike_test_points(s: RandersStructure, count: int, seed: int, box: float = 1.0) -> List[PhasePoint]:
    """Phase points with u uniform in [-box, box] and p on the unit hyperboloid."""
    P, _ = HyperboloidSampler(count=count, sigma_b=0.5, seed=seed, time_symmetric=False).draw(s.eta, s.d)
    U = stream(seed, 'test-point-positions').uniform(-box, box, size=(P.shape[0], s.n))
    return [PhasePoint(U[i], P[i], s.d) for i in range(min(count, P.shape[0]))]
