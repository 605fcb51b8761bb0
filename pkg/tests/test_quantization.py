import sys
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

import numpy as np

from hr_systems.errors import CapabilityError, DomainError
from hr_systems.quantization import (
    build_operators, correspondence_check, evolve_state, gaussian_packet, heisenberg_step,
    hermiticity_residual, propagator, quantum_hamiltonian, unitarity_residual,
)
from report_utils import check, collect_tests, print_section, run_suite


def test_operators():
    print_section("Position and momentum operators")

    th = build_operators(256, spacing=0.1)
    check("Grid centred on zero", th.x[128] == 0.0 and th.x.size == 256)
    check("Momentum is Hermitian", hermiticity_residual(th.p_op) < 1e-12)

    psi = gaussian_packet(th)
    residual = th.commutator_residual(psi)
    check("[x, p] = i hbar on a resolved packet", residual < 1e-8, f"residual {residual:.2e}")
    check("Packet is normalised", abs(np.linalg.norm(psi) - 1.0) < 1e-12)
    check("<p> vanishes at rest", abs(th.expect(th.p_op, psi)) < 1e-10)

    moving = gaussian_packet(th, k0=2.0)
    check("<p> = hbar k0", abs(th.expect(th.p_op, moving) - 2.0) < 1e-8)

    for K in (4, 12, 100):
        try:
            build_operators(K)
            rejected = False
        except CapabilityError:
            rejected = True
        check(f"Grid size {K} rejected", rejected)


def test_hamiltonian():
    print_section("Quantum Hamiltonian")

    th = build_operators(64, spacing=0.2)
    beta = 0.1 * np.sin(th.x)
    H = quantum_hamiltonian(beta, th, 0.25)
    check("Hermitian for real beta", hermiticity_residual(H) < 1e-12)
    check("Vanishes at kappa = 1", np.all(quantum_hamiltonian(beta, th, 1.0) == 0))
    check("Scalar beta broadcasts", quantum_hamiltonian(0.1, th, 0.0).shape == (64, 64))

    for label, args in (("kappa > 1", (beta, th, 1.5)), ("kappa < 0", (beta, th, -0.1)),
                        ("complex beta", (beta + 0.1j, th, 0.0))):
        try:
            quantum_hamiltonian(*args)
            rejected = False
        except DomainError:
            rejected = True
        check(f"{label} rejected", rejected)


def test_propagator():
    print_section("Unitary propagation")

    th = build_operators(64, spacing=0.2)
    H = quantum_hamiltonian(0.1 * np.cos(th.x), th, 0.0)
    U = propagator(H, 0.05)
    check("U is unitary", unitarity_residual(U) < 1e-10, f"{unitarity_residual(U):.2e}")

    psi = evolve_state(gaussian_packet(th), U, steps=50)
    check("Norm preserved", abs(np.linalg.norm(psi) - 1.0) < 1e-10)

    identity = np.eye(64, dtype=complex)
    check("Heisenberg step leaves the identity fixed",
          np.allclose(heisenberg_step(identity, H, 0.05), identity, atol=1e-10))
    check("H commutes with its own evolution", np.allclose(heisenberg_step(H, H, 0.05), H, atol=1e-10))

    try:
        propagator(np.triu(np.ones((4, 4))), 0.1)
        rejected = False
    except DomainError:
        rejected = True
    check("Non-Hermitian H rejected", rejected)


def test_correspondence():
    print_section("Classical correspondence")

    th = build_operators(256, spacing=0.1)
    report, frame = correspondence_check(0.1, th, dtau=0.01, steps=100)
    check("Classical drift is 2 b", abs(report.classical_drift - 0.2) < 1e-12, f"{report.classical_drift}")
    check("Quantum drift matches", report.passed and not report.truncated,
          f"relative error {report.relative_error:.2e}")
    check("Trajectory recorded per step", len(frame) == 101 and list(frame.columns)[:2] == ['tau', 'expect_x'])
    check("Unitarity kept", report.unitarity_error < 1e-10)

    edge = gaussian_packet(th, center=11.0, width=0.5)
    clipped, _ = correspondence_check(1.0, th, state=edge, dtau=0.01, steps=100)
    check("Packet at the grid edge truncates the run", clipped.truncated and clipped.steps_completed < 100,
          f"completed {clipped.steps_completed}")


if __name__ == "__main__":
    success = run_suite("QUANTIZATION", collect_tests(sys.modules[__name__]))
    sys.exit(0 if success else 1)
