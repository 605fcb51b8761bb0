import sys
import warnings
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

import numpy as np

from hr_systems.dynamics import (
    KinematicLimits, apparent_celerity, berwald_validator, beta_split, conservation_drift,
    hamiltonian_value, integrate, kinematics_check, slow_time,
)
from hr_systems.errors import DivergenceError, KinematicDomainError, SingularityError
from hr_systems.flow import KappaSchedule
from hr_systems.geometry import (
    ConstantBeta, LinearBeta, LorentzMetric, PhasePoint, RandersStructure, SinusoidalBeta, sasaki_block_metric,
)
from report_utils import check, collect_tests, print_section, run_suite

START = PhasePoint(np.zeros(8), [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3])


def constant_structure(vector):
    return RandersStructure.build(LorentzMetric.minkowski(4), ConstantBeta(vector))


def sinusoidal_structure(amplitude, wavenumber):
    eye = np.eye(8)
    beta = SinusoidalBeta(np.full(8, amplitude), wavenumber * (eye + 0.5 * np.roll(eye, 1, axis=1)),
                          np.full(8, 0.5 * np.pi))
    return RandersStructure.build(LorentzMetric.minkowski(4), beta)


def test_constant_drift():
    print_section("Constant drift")

    s = constant_structure([0.0, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    traj = integrate(s, None, START, (0.0, 1.0), 0.01)
    moved = traj.final.u[1]
    check("x^1 advances by 2 beta tau", abs(moved - 0.1) < 1e-12, f"x^1 = {moved:.15f}")
    check("Momentum is constant", np.allclose(traj.final.p, START.p, atol=0, rtol=0))
    check("Hamiltonian conserved exactly", conservation_drift(traj, s) < 1e-14)
    check("Samples include both endpoints", traj.times[0] == 0.0 and traj.times[-1] == 1.0 and len(traj) == 101)

    single = integrate(s, None, START, (0.0, 1.0), 0.01, drift_factor=1.0)
    check("drift_factor = 1 halves the displacement", abs(single.final.u[1] - 0.05) < 1e-12)


def test_conservation_sinusoidal():
    print_section("Hamiltonian conservation")

    s = sinusoidal_structure(0.1, 1.0)
    traj = integrate(s, None, START, (0.0, 2.0), 1e-3)
    drift = conservation_drift(traj, s)
    check("Relative drift below 1e-6", drift < 1e-6, f"drift {drift:.2e}")
    check("H(0) = beta(0) . p", abs(hamiltonian_value(s, START) - 0.1 * np.sum(START.p)) < 1e-14)


def test_rk4_order():
    print_section("RK4 convergence order")

    s = sinusoidal_structure(0.3, 2.0)

    def final(dt):
        last = integrate(s, None, START, (0.0, 1.0), dt).final
        return np.concatenate([last.u, last.p])

    reference = final(0.025 / 8.0)
    errors = [np.linalg.norm(final(dt) - reference) for dt in (0.1, 0.05, 0.025)]
    ratios = [errors[0] / errors[1], errors[1] / errors[2]]
    check("Error ratios close to 16", all(12.0 <= r <= 20.0 for r in ratios),
          f"ratios {[round(r, 2) for r in ratios]}")


def test_slow_time():
    print_section("Slow time")

    s = constant_structure([0.0, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    sched = KappaSchedule(1.0)
    check("tau = tau~ at kappa = 0", slow_time(sched, 0.0, 3.0) == 3.0)
    check("tau = 2 tau~ at kappa = 1/2", abs(slow_time(sched, 0.5, 3.0) - 6.0) < 1e-12)

    try:
        slow_time(sched, 1.0, 3.0)
        singular = False
    except SingularityError:
        singular = True
    check("Singular at t = T", singular)

    frozen = integrate(s, sched, START, (0.0, 1.0), 0.01, t=1.0, tau_tilde=True)
    check("Slow-time field vanishes at kappa = 1", np.array_equal(frozen.final.u, START.u))
    half = integrate(s, sched, START, (0.0, 1.0), 0.01, t=0.5, tau_tilde=True)
    check("Slow-time field scaled by 1 - kappa", abs(half.final.u[1] - 0.05) < 1e-12)


def test_divergence():
    print_section("Divergence")

    metric = LorentzMetric.minkowski(4)
    explosive = RandersStructure(N=1, d=4, eta=sasaki_block_metric(metric), beta=LinearBeta(1e3 * np.eye(8)),
                                 metric=metric)
    start = PhasePoint(np.full(8, 0.1), START.p)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', RuntimeWarning)
            integrate(explosive, None, start, (0.0, 100.0), 1.0)
        raised = False
        last_time = None
    except DivergenceError as e:
        raised = True
        last_time = e.last_time
    check("DivergenceError raised", raised)
    check("Last finite state reported", last_time is not None, f"last time {last_time}")


def test_kinematics():
    print_section("Kinematic limits")

    limits = KinematicLimits.from_length(1.0, 1.0)
    check("A_max = c^2 / L", limits.A_max == 1.0)

    slow = constant_structure([0.0, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    report = kinematics_check(integrate(slow, None, START, (0.0, 1.0), 0.01), limits)
    check("Slow drift within limits", report.passed, f"max speed {report.max_speed}")
    check("Observed speed is 2 beta", abs(float(report.max_speed[0]) - 0.1) < 1e-9)

    fast = constant_structure([0.0, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    flagged = kinematics_check(integrate(fast, None, START, (0.0, 1.0), 0.01), limits)
    check("Superluminal coordinate speed flagged", len(flagged.speed_flags) > 0 and not flagged.passed)
    check("Report serialises", set(flagged.to_dict()) >= {'max_speed', 'speed_flags', 'passed'})


def test_apparent_celerity():
    print_section("Apparent celerity")

    limits = KinematicLimits(1.0, 1.0)
    check("0.6c at rest -> 0.75c", abs(apparent_celerity(0.6, 0.0, limits) - 0.75) < 1e-12)
    check("0.6c at 0.8 A_max -> 1.25c", abs(apparent_celerity(0.6, 0.8, limits) - 1.25) < 1e-12)

    for v, a, label in ((0.6, 1.0, "a = A_max"), (1.0, 0.0, "v = c_max")):
        try:
            apparent_celerity(v, a, limits)
            rejected = False
        except KinematicDomainError:
            rejected = True
        check(f"{label} rejected", rejected)


def test_beta_split_and_berwald():
    print_section("Beta split and Berwald check")

    s = constant_structure([0.0, 0.05, 0.0, 0.0, 0.0, 0.02, 0.0, 0.0])
    beta_x, beta_y = beta_split(s, np.zeros(8))
    check("Parts add up to beta", np.allclose(beta_x + beta_y, s.beta(np.zeros(8))))
    check("x part lives on the x block", np.array_equal(beta_x, [0.0, 0.05, 0, 0, 0, 0, 0, 0]))
    check("y part lives on the y block", np.array_equal(beta_y, [0.0, 0, 0, 0, 0, 0.02, 0, 0]))

    test_points = [np.zeros(8), np.full(8, 0.3)]
    check("Constant drift is Berwald", berwald_validator(s, test_points).passed)
    wavy = sinusoidal_structure(0.1, 1.0)
    check("Sinusoidal drift is not Berwald", not berwald_validator(wavy, test_points).passed)


if __name__ == "__main__":
    success = run_suite("HAMILTONIAN DYNAMICS", collect_tests(sys.modules[__name__]))
    sys.exit(0 if success else 1)
