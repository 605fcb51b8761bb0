import sys
import math
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

import numpy as np

from hr_systems.concentration import (
    SPHERE_CONSTANT, GaussianSampler, SphereSampler, UniformBoxSampler, bound, collapse_metrics,
    empirical_concentration, empirical_lipschitz, levy_mean, quantum_scale_ratio,
)
from hr_systems.ensemble import CycleSettings, MoleculeEnsemble, run_cycle
from hr_systems.errors import DomainError
from report_utils import check, collect_tests, print_section, run_suite


def test_levy_mean():
    print_section("Levy mean")

    check("Odd count: middle value", levy_mean([3.0, 1.0, 2.0]) == 2.0)
    check("Even count: midpoint of the central pair", levy_mean([4.0, 1.0, 3.0, 2.0]) == 2.5)

    try:
        levy_mean([])
        rejected = False
    except DomainError:
        rejected = True
    check("Empty sample rejected", rejected)


def test_bounds():
    print_section("Closed-form bounds")

    value = bound('sphere', N=100, eps=0.1)
    check("Sphere bound", abs(value - SPHERE_CONSTANT * math.exp(-0.01 * 99 / 2)) < 1e-15, f"{value:.6f}")
    check("Gaussian bound at rho = rho_P", abs(bound('gaussian', rho=1.0, rho_P=1.0) - 0.5 * math.exp(-0.5)) < 1e-15)
    check("General bound reduces to C1 exp(-C2 ...)",
          abs(bound('general', rho=2.0, rho_P=1.0, C1=2.0, C2=0.5) - 2.0 * math.exp(-1.0)) < 1e-15)
    check("Quantum scale ratio equals N", quantum_scale_ratio(7) == 7.0)

    dims = [10, 100, 1000]
    sphere = [bound('sphere', N=n, eps=0.1) for n in dims]
    linear = [bound('sphere_linear', N=n, eps=0.1) for n in dims]
    check("Sphere bounds decrease with N", sphere[0] > sphere[1] > sphere[2])
    check("Linear-exponent bounds decrease with N", linear[0] > linear[1] > linear[2])
    check("HR-scale bound underflows to zero for N = 1e3", bound('hr_scale', N=1000) == 0.0)

    for kind, params in (('sphere', {'N': 10, 'eps': 1.5}), ('gaussian', {'rho': -1.0}),
                         ('hr_scale', {'N': 0}), ('cubic', {})):
        try:
            bound(kind, **params)
            rejected = False
        except DomainError:
            rejected = True
        check(f"{kind} with {params} rejected", rejected)


def test_samplers():
    print_section("Chunked samplers")

    sphere = SphereSampler(dim=9, count=20000, seed=1)
    points = sphere.draw()
    check("Sphere points in the ambient space", points.shape == (20000, 10))
    check("Unit norm", np.allclose(np.linalg.norm(points, axis=1), 1.0, atol=1e-12))

    def first(x):
        return x[:, 0]

    single = sphere.map_chunks(first, threads=1)
    pooled = sphere.map_chunks(first, threads=4)
    check("Thread count does not change the sample", np.array_equal(single, pooled))
    check("Same seed, same sample", np.array_equal(points, SphereSampler(dim=9, count=20000, seed=1).draw()))

    box = UniformBoxSampler(dim=3, count=5000, seed=2, lower=-2.0, upper=2.0).draw()
    check("Box samples stay inside", box.min() >= -2.0 and box.max() < 2.0)
    gauss = GaussianSampler(dim=2, count=50000, seed=3, scale=2.0).draw()
    std = float(np.std(gauss))
    check("Gaussian scale", abs(std - 2.0) < 0.05, f"std {std:.4f}")

    try:
        SphereSampler(dim=0, count=10, seed=0)
        rejected = False
    except DomainError:
        rejected = True
    check("Zero dimension rejected", rejected)


def test_empirical_concentration_sphere():
    print_section("Sphere concentration")

    sampler = SphereSampler(dim=99, count=20000, seed=4)
    report = empirical_concentration(lambda x: x[:, 0], sampler, [0.1, 0.2, 0.3],
                                     bound_fn=lambda eps: bound('sphere', N=100, eps=eps), threads=2)
    check("Median of the first coordinate near 0", abs(report.levy_mean) < 0.01, f"M_f {report.levy_mean:.4f}")
    check("Tails decrease with rho", report.empirical[0] > report.empirical[1] > report.empirical[2],
          f"{np.round(report.empirical, 4)}")
    check("Every tail under the bound", report.all_passed,
          f"empirical {np.round(report.empirical, 4)} bound {np.round(report.bound, 4)}")
    check("Report frame columns", list(report.to_frame().columns) == ['rho', 'empirical', 'bound', 'pass'])

    trivial = empirical_concentration(lambda x: x[:, 0], sampler, [0.1])
    check("No bound: trivial bound of 1", trivial.bound[0] == 1.0 and trivial.notes['bound_kind'] == 'trivial')

    try:
        empirical_concentration(lambda x: x[:, 0], SphereSampler(dim=5, count=100, seed=0), [0.1])
        rejected = False
    except DomainError:
        rejected = True
    check("Fewer than 1000 samples rejected", rejected)


def test_empirical_lipschitz():
    print_section("Empirical Lipschitz constant")

    a = np.linspace(0.0, 1.0, 50)[:, None]
    b = a[::-1] + 0.01
    estimate = empirical_lipschitz(lambda x: 3.0 * x[:, 0], (a, b))
    check("Linear map of slope 3", abs(estimate.estimate - 3.0) < 1e-12, f"L = {estimate.estimate}")

    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(500, 4)), rng.normal(size=(500, 4))
    norm = empirical_lipschitz(lambda x: np.linalg.norm(x, axis=1), (A, B))
    check("Euclidean norm is 1-Lipschitz", norm.estimate <= 1.0 + 1e-12, f"L = {norm.estimate:.4f}")

    same = np.ones((3, 2))
    skipped = empirical_lipschitz(lambda x: x[:, 0], [(same[0], same[1]), (same[0], same[0] + 1.0)])
    check("Coincident pairs skipped", skipped.skipped == 1 and skipped.used == 1)


def test_collapse_metrics():
    print_section("Collapse metrics")

    e = MoleculeEnsemble.create(N=1000, d=4, seed=6)
    record = run_cycle(e, CycleSettings(T=1.0))
    report = collapse_metrics(record, sigma_f=10.0)
    check("Contracted spread below sigma_f", report.collapsed, f"spread {report.spread:.4g}")
    check("Variance ratio below one", report.variance_ratio < 0.05, f"ratio {report.variance_ratio:.4g}")
    check("Scale ratio is N", report.scale_ratio == 1000.0)
    check("Phase variances listed", set(report.phase_variance) == {'ergodic', 'contractive', 'expansive'})
    check("Tiny sigma_f means no collapse", not collapse_metrics(record, sigma_f=1e-9).collapsed)

    free = run_cycle(e, CycleSettings(T=1.0, contraction=False))
    check("No contraction, no collapse", not collapse_metrics(free, sigma_f=10.0).collapsed)

    try:
        collapse_metrics(record, sigma_f=0.0)
        rejected = False
    except DomainError:
        rejected = True
    check("Non-positive sigma_f rejected", rejected)


if __name__ == "__main__":
    success = run_suite("CONCENTRATION OF MEASURE", collect_tests(sys.modules[__name__]))
    sys.exit(0 if success else 1)
