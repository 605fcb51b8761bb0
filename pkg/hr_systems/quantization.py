"""Finite-dimensional canonical quantisation on a periodic grid.

Position is diagonal on the grid; momentum is spectral differentiation
p = F^dagger diag(hbar k) F with F the unitary DFT.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from .dynamics import integrate
from .errors import CapabilityError, DomainError
from .geometry import ConstantBeta, LorentzMetric, PhasePoint, RandersStructure

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
WRAP_FRACTION = 0.9
WRAP_MASS = 1e-8


@dataclass(frozen=True)
class ToyHilbert:
    K: int
    spacing: float
    hbar: float
    x: np.ndarray
    k: np.ndarray
    x_op: np.ndarray
    p_op: np.ndarray

    def commutator_residual(self, psi: np.ndarray) -> float:
        """|| ([x, p] - i hbar) psi ||."""
        psi = np.asarray(psi, dtype=complex)
        commutator = self.x_op @ (self.p_op @ psi) - self.p_op @ (self.x_op @ psi)
        return float(np.linalg.norm(commutator - 1j * self.hbar * psi))

    def expect(self, A: np.ndarray, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, A @ psi)))


def build_operators(K: int, spacing: float = 0.1, hbar: float = 1.0) -> ToyHilbert:
    if K < 8 or K & (K - 1):
        raise CapabilityError(f"grid size must be a power of two >= 8, got {K}")
    if not (spacing > 0 and hbar > 0):
        raise DomainError(f"spacing and hbar must be positive (spacing={spacing}, hbar={hbar})")
    x = (np.arange(K) - K // 2) * spacing
    k = 2.0 * np.pi * np.fft.fftfreq(K, spacing)
    F = np.fft.fft(np.eye(K), axis=0) / np.sqrt(K)
    p_op = F.conj().T @ (hbar * k[:, None] * F)
    p_op = 0.5 * (p_op + p_op.conj().T)
    x_op = np.diag(x).astype(complex)
    return ToyHilbert(K=K, spacing=spacing, hbar=hbar, x=x, k=k, x_op=x_op, p_op=p_op)


def gaussian_packet(th: ToyHilbert, center: float = 0.0, width: float = 1.0, k0: float = 0.0) -> np.ndarray:
    psi = np.exp(-((th.x - center) ** 2) / (2.0 * width**2) + 1j * k0 * th.x)
    return psi / np.linalg.norm(psi)


def hermiticity_residual(A: np.ndarray) -> float:
    return float(np.max(np.abs(A - A.conj().T)))


def quantum_hamiltonian(beta_values: np.ndarray, th: ToyHilbert, kappa_t: float) -> np.ndarray:
    """(1 - kappa) * 1/2 (B p + p B) with B = diag(beta)."""
    beta = np.asarray(beta_values)
    if np.iscomplexobj(beta):
        if np.any(np.imag(beta) != 0):
            raise DomainError("beta must be real on the grid")
        beta = np.real(beta)
    beta = np.broadcast_to(beta.astype(float), (th.K,))
    if not 0.0 <= kappa_t <= 1.0:
        raise DomainError(f"kappa must lie in [0, 1], got {kappa_t}")
    symmetric = 0.5 * (beta[:, None] * th.p_op + th.p_op * beta[None, :])
    return (1.0 - kappa_t) * symmetric


def propagator(H: np.ndarray, dtau: float, hbar: float = 1.0) -> np.ndarray:
    """U = exp(-i H dtau / hbar) by eigendecomposition."""
    if hermiticity_residual(H) > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(H)))):
        raise DomainError("Hamiltonian is not Hermitian")
    energies, vectors = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (vectors * np.exp(-1j * energies * dtau / hbar)) @ vectors.conj().T


def unitarity_residual(U: np.ndarray) -> float:
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def evolve_state(psi: np.ndarray, U: np.ndarray, steps: int = 1) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    for _ in range(steps):
        psi = U @ psi
    return psi


def heisenberg_step(A: np.ndarray, H: np.ndarray, dtau: float, hbar: float = 1.0) -> np.ndarray:
    """A(tau + dtau) = U^dagger A U."""
    U = propagator(H, dtau, hbar)
    return U.conj().T @ A @ U


@dataclass
class CorrespondenceReport:
    b: float
    drift_factor: float
    steps_requested: int
    steps_completed: int
    truncated: bool
    quantum_drift: float
    classical_drift: float
    relative_error: float
    max_abs_error: float
    norm_error: float
    unitarity_error: float
    tolerance: float = 1e-6

    @property
    def passed(self) -> bool:
        return self.relative_error < self.tolerance

    def to_dict(self) -> Dict:
        data = dict(self.__dict__)
        data['passed'] = self.passed
        return data


def _classical_oracle(b: float, x0: float, tau_end: float, dtau: float, drift_factor: float) -> np.ndarray:
    structure = RandersStructure.build(LorentzMetric.minkowski(2), ConstantBeta([0.0, b, 0.0, 0.0]))
    start = PhasePoint([0.0, x0, 1.0, 0.0], [1.0, 0.0, 0.0, 0.0], d=2)
    trajectory = integrate(structure, None, start, (0.0, tau_end), dtau, drift_factor=drift_factor)
    return np.array([state.u[1] for state in trajectory.states])


def correspondence_check(b: float, th: ToyHilbert, state: Optional[np.ndarray] = None,
                         dtau: float = 0.01, steps: int = 100,
                         drift_factor: float = 2.0) -> Tuple[CorrespondenceReport, pd.DataFrame]:
    """Heisenberg evolution of <x> against the classical drift drift_factor * b."""
    psi0 = gaussian_packet(th) if state is None else np.asarray(state, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)
    H = drift_factor * quantum_hamiltonian(np.full(th.K, float(b)), th, 0.0)
    U = propagator(H, dtau, th.hbar)
    U_dagger = U.conj().T

    edge = WRAP_FRACTION * np.max(np.abs(th.x))
    near_edge = np.abs(th.x) >= edge
    X = th.x_op.copy()
    psi = psi0.copy()
    expect = [th.expect(X, psi0)]
    completed = 0
    truncated = False
    for _ in range(steps):
        X = U_dagger @ X @ U
        psi = evolve_state(psi, U)
        if np.sum(np.abs(psi[near_edge]) ** 2) > WRAP_MASS:
            truncated = True
            log.warning(f"correspondence_check: packet reached the grid edge after {completed} steps; truncating")
            break
        expect.append(th.expect(X, psi0))
        completed += 1

    taus = dtau * np.arange(completed + 1)
    expect = np.asarray(expect)
    if completed:
        classical = _classical_oracle(b, expect[0], taus[-1], dtau, drift_factor)[:completed + 1]
    else:
        classical = expect[:1].copy()
    errors = np.abs(expect - classical)

    tau_end = taus[-1] if completed else 1.0
    quantum_drift = (expect[-1] - expect[0]) / tau_end
    classical_drift = (classical[-1] - classical[0]) / tau_end
    scale = abs(classical_drift) if classical_drift != 0 else 1.0
    report = CorrespondenceReport(
        b=float(b),
        drift_factor=drift_factor,
        steps_requested=steps,
        steps_completed=completed,
        truncated=truncated,
        quantum_drift=float(quantum_drift),
        classical_drift=float(classical_drift),
        relative_error=float(abs(quantum_drift - classical_drift) / scale),
        max_abs_error=float(np.max(errors)),
        norm_error=float(abs(np.linalg.norm(psi) - 1.0)),
        unitarity_error=unitarity_residual(U),
    )
    frame = pd.DataFrame({'tau': taus, 'expect_x': expect, 'classical_x': classical, 'abs_error': errors})
    return report, frame
