"""Heisenberg/Hamilton correspondence on the toy Hilbert space plus the classical integrator checks."""
import logging
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from hr_systems.dynamics import (
    KinematicLimits, apparent_celerity, berwald_validator, conservation_drift, integrate, kinematics_check,
)
from hr_systems.ensemble import correlation_bound
from hr_systems.errors import KinematicDomainError
from hr_systems.geometry import ObserverFrame, PhasePoint, RandersStructure, SinusoidalBeta, distance_to_worldline
from hr_systems.quantization import build_operators, correspondence_check, gaussian_packet

from .builders import ScenarioContext, build_limits, build_metric, resolve_semi_period

log = logging.getLogger(__name__)

CONSERVATION_TOLERANCE = 1e-6
COMMUTATOR_TOLERANCE = 1e-8
ORDER_WINDOW = (12.0, 20.0)


def sinusoidal_structure(ctx: ScenarioContext, amplitude: float, wavenumber: float) -> RandersStructure:
    """Flat structure with beta = a sin(k (I + roll(I)/2) u + pi/2), Berwald-incompatible by construction."""
    metric = build_metric(ctx.config)
    n = 2 * metric.dim
    eye = np.eye(n)
    beta = SinusoidalBeta(
        amplitude=np.full(n, amplitude),
        wavenumbers=wavenumber * (eye + 0.5 * np.roll(eye, 1, axis=1)),
        phase=np.full(n, 0.5 * np.pi),
    )
    return RandersStructure.build(metric, beta, N=1, seed=ctx.seed)


def initial_point(s: RandersStructure) -> PhasePoint:
    n = s.n
    p = np.linspace(1.0, 0.1, n)
    return PhasePoint(np.zeros(n), p, s.d)


def conservation(ctx: ScenarioContext, limits: KinematicLimits) -> Dict[str, Any]:
    cfg = ctx.config
    s = sinusoidal_structure(ctx, float(cfg.param('conservation_amplitude', 0.1)), float(cfg.param('wavenumber', 1.0)))
    dt = cfg.dynamics.dt
    steps = int(cfg.param('conservation_steps', 10_000))
    trajectory = integrate(s, None, initial_point(s), (0.0, steps * dt), dt, drift_factor=cfg.dynamics.drift_factor)
    drift = conservation_drift(trajectory, s)
    ctx.tracker.record('DY001', drift < CONSERVATION_TOLERANCE, value=drift, threshold=CONSERVATION_TOLERANCE,
                       notes=f"{steps} RK4 steps of {dt}")

    kinematics = kinematics_check(trajectory, limits, s.metric)
    berwald = berwald_validator(s, trajectory.states[::max(1, len(trajectory) // 50)])
    ctx.writer.write_table(trajectory.to_frame().iloc[::max(1, len(trajectory) // 500)], 'conservation_trajectory')
    return {
        'relative_drift': drift,
        'kinematics': kinematics.to_dict(),
        'berwald_gradient_norm': berwald.max_gradient_norm,
    }


def convergence_order(ctx: ScenarioContext) -> pd.DataFrame:
    """Final-state error against a dt/8 reference for three halvings of dt."""
    cfg = ctx.config
    s = sinusoidal_structure(ctx, float(cfg.param('order_amplitude', 0.3)), float(cfg.param('order_wavenumber', 2.0)))
    span = (0.0, float(cfg.param('order_span', 2.0)))
    steps: List[float] = [float(h) for h in cfg.param('order_steps', [0.05, 0.025, 0.0125])]
    start = initial_point(s)

    def final_state(dt: float) -> np.ndarray:
        last = integrate(s, None, start, span, dt, drift_factor=cfg.dynamics.drift_factor).final
        return np.concatenate([last.u, last.p])

    reference = final_state(min(steps) / 8.0)
    errors = [float(np.linalg.norm(final_state(dt) - reference)) for dt in steps]
    ratios = [np.nan] + [errors[i - 1] / errors[i] for i in range(1, len(errors))]
    frame = pd.DataFrame({'dt': steps, 'error': errors, 'ratio': ratios})
    in_window = all(ORDER_WINDOW[0] <= r <= ORDER_WINDOW[1] for r in ratios[1:])
    ctx.tracker.record('DY002', in_window, value=[round(r, 3) for r in ratios[1:]], threshold=list(ORDER_WINDOW))
    return frame


def celerity(ctx: ScenarioContext, limits: KinematicLimits) -> Dict[str, Any]:
    at_rest = apparent_celerity(0.6 * limits.c_max, 0.0, limits) / limits.c_max
    accelerated = apparent_celerity(0.6 * limits.c_max, 0.8 * limits.A_max, limits) / limits.c_max
    try:
        apparent_celerity(0.6 * limits.c_max, limits.A_max, limits)
        rejects_limit = False
    except KinematicDomainError:
        rejects_limit = True
    ok = abs(at_rest - 0.75) < 1e-12 and abs(accelerated - 1.25) < 1e-12 and rejects_limit
    ctx.tracker.record('DY003', ok, value=[at_rest, accelerated], threshold=[0.75, 1.25],
                       notes='a = A_max rejected' if rejects_limit else 'a = A_max accepted')
    return {'zero_acceleration': at_rest, 'eighty_percent_A_max': accelerated, 'rejects_A_max': rejects_limit}


def correlation_reach(ctx: ScenarioContext, limits: KinematicLimits) -> Dict[str, Any]:
    """Observer distance covered in one cycle 2T against the correlation bound 2 T c."""
    cfg = ctx.config
    s = sinusoidal_structure(ctx, float(cfg.param('conservation_amplitude', 0.1)), float(cfg.param('wavenumber', 1.0)))
    T = resolve_semi_period(cfg)
    bound = correlation_bound(T=T, c_max=limits.c_max)
    trajectory = integrate(s, None, initial_point(s), (0.0, 2.0 * T), cfg.dynamics.dt,
                           drift_factor=cfg.dynamics.drift_factor)
    start, end = trajectory.states[0].x[0], trajectory.final.x[0]

    # world line of a static observer through the starting event
    frame = ObserverFrame.static(s.d)
    reach = 2.0 * bound + abs(float(end[0] - start[0]))
    line = start + np.linspace(-reach, reach, 4001)[:, None] * frame.vector()
    distance = distance_to_worldline(end, line, frame, s.metric)
    ctx.tracker.record('DY004', distance <= bound, value=distance, threshold=bound, notes=f"T={T}")
    return {'T': T, 'bound': bound, 'distance': distance, 'sign_convention': frame.sign_convention}


def quantum(ctx: ScenarioContext) -> Dict[str, Any]:
    cfg = ctx.config
    th = build_operators(int(cfg.param('grid_size', 256)), float(cfg.param('spacing', 0.1)),
                         float(cfg.param('hbar', 1.0)))
    packet = gaussian_packet(th, width=float(cfg.param('packet_width', 1.0)))
    report, frame = correspondence_check(
        float(cfg.param('b', 0.1)), th, packet,
        dtau=float(cfg.param('dtau', 0.01)),
        steps=int(cfg.param('steps', 100)),
        drift_factor=cfg.dynamics.drift_factor,
    )
    ctx.tracker.record('QU001', report.passed and not report.truncated, value=report.relative_error,
                       threshold=report.tolerance,
                       notes=f"{report.steps_completed}/{report.steps_requested} steps")
    residual = th.commutator_residual(packet)
    ctx.tracker.record('QU002', residual < COMMUTATOR_TOLERANCE, value=residual, threshold=COMMUTATOR_TOLERANCE)
    ctx.writer.write_table(frame, 'correspondence')
    summary = report.to_dict()
    summary['commutator_residual'] = residual
    summary['grid_size'] = th.K
    return summary


def run(ctx: ScenarioContext) -> Dict[str, Any]:
    limits = build_limits(ctx.config)
    log.info("Quantum drift against the classical oracle...")
    quantum_summary = quantum(ctx)
    log.info("Hamiltonian conservation and kinematics...")
    conservation_summary = conservation(ctx, limits)
    log.info("RK4 convergence order...")
    order = convergence_order(ctx)
    ctx.writer.write_table(order, 'rk4_order')
    report = {
        'scenario': 'correspondence',
        'quantum': quantum_summary,
        'conservation': conservation_summary,
        'rk4_order': order.to_dict(orient='records'),
        'celerity': celerity(ctx, limits),
        'correlation': correlation_reach(ctx, limits),
    }
    ctx.writer.write_report(report, 'correspondence_report')
    return report
