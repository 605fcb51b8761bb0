"""U_tau dynamics: Hamilton equations of the Randers Hamiltonian, RK4, kinematic bounds."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DivergenceError, DomainError, KinematicDomainError, SingularityError
from .flow import KappaSchedule
from .geometry import LorentzMetric, ObserverFrame, PhasePoint, RandersStructure, inversion_signs, observer_norm

log = logging.getLogger(__name__)

DEFAULT_DRIFT_FACTOR = 2.0


@dataclass(frozen=True)
class KinematicLimits:
    c_max: float = 1.0
    L_min: float = 1.0
    A_max: float = field(init=False)

    def __post_init__(self):
        if not (self.c_max > 0 and self.L_min > 0):
            raise DomainError(f"kinematic limits must be positive: c_max={self.c_max} L_min={self.L_min}")
        object.__setattr__(self, 'A_max', self.c_max**2 / self.L_min)

    @classmethod
    def from_length(cls, c_max: float, L_min: float) -> 'KinematicLimits':
        return cls(c_max=c_max, L_min=L_min)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: List[PhasePoint]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.size != len(self.states):
            raise DomainError(f"{times.size} times for {len(self.states)} states")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise DomainError("trajectory times must be strictly increasing")
        object.__setattr__(self, 'times', times)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def final(self) -> PhasePoint:
        return self.states[-1]

    def positions(self) -> np.ndarray:
        """Array (samples, N, d) of x coordinates."""
        return np.stack([state.x for state in self.states])

    def to_frame(self) -> pd.DataFrame:
        d = self.states[0].d
        rows = []
        for tau, state in zip(self.times, self.states):
            for k in range(state.N):
                row = {'tau': tau, 'molecule_id': k}
                for label, block in (('x', state.x), ('y', state.y), ('px', state.px), ('py', state.py)):
                    row.update({f"{label}{mu}": block[k, mu] for mu in range(d)})
                rows.append(row)
        return pd.DataFrame(rows)


def hamiltonian_value(s: RandersStructure, pt: PhasePoint) -> float:
    """H = beta(u) . p in the metastable regime."""
    return float(s.beta(pt.u) @ pt.p)


def _rhs(s: RandersStructure, u: np.ndarray, p: np.ndarray, factor: float) -> Tuple[np.ndarray, np.ndarray]:
    jac = s.beta.jacobian(u)
    return factor * s.beta(u), -factor * (jac.T @ p)


def hamilton_rhs(s: RandersStructure, sched: Optional[KappaSchedule], t: float, pt: PhasePoint,
                 drift_factor: float = DEFAULT_DRIFT_FACTOR,
                 tau_tilde: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """(du/dtau, dp/dtau) = (f beta(u), -f J^T p).

    With ``tau_tilde`` the field is written in slow time and scaled by 1 - kappa(t).
    """
    factor = drift_factor * ((1.0 - sched.kappa(t)) if tau_tilde else 1.0)
    return _rhs(s, pt.u, pt.p, factor)


def integrate(s: RandersStructure, sched: Optional[KappaSchedule], pt0: PhasePoint,
              span: Sequence[float], dt: float, t: float = 0.0,
              drift_factor: float = DEFAULT_DRIFT_FACTOR, tau_tilde: bool = False) -> Trajectory:
    """Fixed-step classical RK4 with kappa frozen at internal time t."""
    tau0, tau1 = float(span[0]), float(span[1])
    if not dt > 0:
        raise DomainError(f"step must be positive, got {dt}")
    if not tau1 > tau0:
        raise DomainError(f"degenerate span [{tau0}, {tau1}]")
    factor = drift_factor * ((1.0 - sched.kappa(t)) if tau_tilde else 1.0)

    n = pt0.u.size
    n_steps = int(np.floor((tau1 - tau0) / dt + 1e-9))
    times = [tau0 + i * dt for i in range(n_steps + 1)]
    if tau1 - times[-1] > 1e-12 * max(1.0, abs(tau1)):
        times.append(tau1)
    else:
        times[-1] = tau1 if n_steps > 0 else times[-1]

    def field_at(z: np.ndarray) -> np.ndarray:
        du, dp = _rhs(s, z[:n], z[n:], factor)
        return np.concatenate([du, dp])

    z = np.concatenate([pt0.u, pt0.p])
    states = [pt0]
    for i in range(1, len(times)):
        h = times[i] - times[i - 1]
        k1 = field_at(z)
        k2 = field_at(z + 0.5 * h * k1)
        k3 = field_at(z + 0.5 * h * k2)
        k4 = field_at(z + h * k3)
        z_next = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z_next)):
            raise DivergenceError(f"integration diverged at tau = {times[i]:.6g}",
                                  last_state=states[-1], last_time=times[i - 1])
        z = z_next
        states.append(PhasePoint(z[:n], z[n:], pt0.d))
    return Trajectory(np.asarray(times), states)


def conservation_drift(traj: Trajectory, s: RandersStructure) -> float:
    """max |H(tau) - H(0)| / |H(0)| along a trajectory."""
    h0 = hamiltonian_value(s, traj.states[0])
    scale = abs(h0) if h0 != 0 else 1.0
    return max(abs(hamiltonian_value(s, state) - h0) for state in traj.states) / scale


def slow_time(sched: KappaSchedule, t: float, tau_tilde: float) -> float:
    """tau = tau_tilde / (1 - kappa(t))."""
    k = sched.kappa(t)
    if k >= 1.0:
        raise SingularityError(f"slow-time reparameterisation is singular at t = {t} (kappa = 1)")
    return tau_tilde / (1.0 - k)


@dataclass
class KinematicsReport:
    max_speed: np.ndarray
    max_acceleration: np.ndarray
    speed_flags: List[Dict[str, float]]
    acceleration_flags: List[Dict[str, float]]
    on_shell_residual: float

    @property
    def passed(self) -> bool:
        return not (self.speed_flags or self.acceleration_flags)

    def to_dict(self) -> Dict:
        return {
            'max_speed': self.max_speed.tolist(),
            'max_acceleration': self.max_acceleration.tolist(),
            'speed_flags': self.speed_flags,
            'acceleration_flags': self.acceleration_flags,
            'on_shell_residual': self.on_shell_residual,
            'passed': self.passed,
        }


def kinematics_check(traj: Trajectory, limits: KinematicLimits, g4: Optional[LorentzMetric] = None,
                     frame: Optional[ObserverFrame] = None) -> KinematicsReport:
    """Observer-frame speeds and accelerations from finite differences; report only."""
    if len(traj) < 3:
        raise DomainError("kinematics_check needs at least 3 samples")
    d = traj.states[0].d
    g4 = g4 or LorentzMetric.minkowski(d)
    frame = frame or ObserverFrame.static(d)

    X = traj.positions()
    tau = traj.times
    dtau = np.diff(tau)
    V = np.diff(X, axis=0) / dtau[:, None, None]
    mid = 0.5 * (tau[2:] - tau[:-2])
    A = np.diff(V, axis=0) / mid[:, None, None]

    speed = observer_norm(g4, frame, V)
    accel = observer_norm(g4, frame, A)

    speed_flags = [
        {'molecule': int(k), 'index': int(i), 'value': float(speed[i, k])}
        for i, k in zip(*np.nonzero(speed > limits.c_max))
    ]
    accel_flags = [
        {'molecule': int(k), 'index': int(i + 1), 'value': float(accel[i, k])}
        for i, k in zip(*np.nonzero(accel > limits.A_max))
    ]
    Y = np.stack([state.y for state in traj.states[:-1]])
    residual = float(np.max(np.linalg.norm(V - Y, axis=-1)))
    if speed_flags or accel_flags:
        log.warning(f"kinematics_check: {len(speed_flags)} speed and {len(accel_flags)} acceleration exceedances")
    return KinematicsReport(
        max_speed=np.max(speed, axis=0),
        max_acceleration=np.max(accel, axis=0),
        speed_flags=speed_flags,
        acceleration_flags=accel_flags,
        on_shell_residual=residual,
    )


def apparent_celerity(v_tilde: float, a: float, limits: KinematicLimits) -> float:
    """v = v~ / (sqrt(1 - a^2/A_max^2) sqrt(1 - v~^2/c^2))."""
    c = limits.c_max
    if v_tilde < 0 or a < 0:
        raise KinematicDomainError(f"speed and acceleration must be non-negative (v~={v_tilde}, a={a})")
    if v_tilde >= c:
        raise KinematicDomainError(f"coordinate speed {v_tilde} reaches c_max = {c}")
    if a >= limits.A_max:
        raise KinematicDomainError(f"acceleration {a} reaches A_max = {limits.A_max}")
    return v_tilde / (np.sqrt(1.0 - (a / limits.A_max) ** 2) * np.sqrt(1.0 - (v_tilde / c) ** 2))


def beta_split(s: RandersStructure, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(beta_x, beta_y) = (1/2 (beta - T beta), 1/2 (beta + T beta))."""
    beta = s.beta(np.asarray(u, dtype=float))
    inverted = beta * inversion_signs(s.d, s.N)
    return 0.5 * (beta - inverted), 0.5 * (beta + inverted)


@dataclass(frozen=True)
class BerwaldReport:
    max_gradient_norm: float
    tolerance: float
    test_points: int

    @property
    def passed(self) -> bool:
        return self.max_gradient_norm < self.tolerance


def berwald_validator(s: RandersStructure, test_points: Sequence[Union[PhasePoint, np.ndarray]],
                      tolerance: float = 1e-12) -> BerwaldReport:
    """max Frobenius norm of d beta / du over the test points (flat eta)."""
    if s.metric is not None and not s.metric.is_constant:
        raise DomainError("berwald_validator assumes a flat background")
    worst = 0.0
    for point in test_points:
        u = point.u if isinstance(point, PhasePoint) else np.asarray(point, dtype=float)
        worst = max(worst, float(np.linalg.norm(s.beta.jacobian(u))))
    return BerwaldReport(max_gradient_norm=worst, tolerance=tolerance, test_points=len(test_points))
