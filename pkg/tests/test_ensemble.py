import sys
import math
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

import numpy as np
from scipy import constants, stats

from hr_systems.errors import CoverageError, DomainError
from hr_systems.ensemble import (
    ConstantPhase, CycleSettings, GridSpec, MoleculeEnsemble, PlaneWavePhase, assemble_wavefunction,
    correlation_bound, density_field, density_from_points, density_from_worldlines, inner_product,
    oscillation_overlap, refinement_sweep, run_cycle, run_cycles, semi_period,
)
from hr_systems.geometry import ConstantBeta
from hr_systems.rng import stream
from report_utils import check, collect_tests, print_section, run_suite


def test_semi_period_and_correlation():
    print_section("Semi-period and correlation bound")

    check("Natural units: T = alpha / M", semi_period(2.0, 0.5) == 0.25)
    electron = semi_period(constants.m_e, 1.0, 'si')
    check("Electron semi-period ~ 1.3e-21 s", 1.2e-21 < electron < 1.4e-21, f"T = {electron:.3e}")
    check("Correlation bound 2 T c", correlation_bound(T=0.25, c_max=1.0) == 0.5)
    check("Massless system is unbounded", math.isinf(correlation_bound(M_sys=0.0)))

    try:
        semi_period(0.0)
        rejected = False
    except DomainError:
        rejected = True
    check("Zero mass rejected for T", rejected)


def test_ensemble_creation():
    print_section("Molecule ensembles")

    e = MoleculeEnsemble.create(N=500, d=4, seed=3, spread=0.5)
    check("Positions have shape (N, d - 1)", e.positions.shape == (500, 3))
    check("Deterministic in the seed",
          np.array_equal(e.u, MoleculeEnsemble.create(N=500, d=4, seed=3, spread=0.5).u))
    moved = e.recentered([1.0, -2.0, 0.5])
    check("Recentred median", np.allclose(np.median(moved.positions, axis=0), [1.0, -2.0, 0.5], atol=1e-12))

    try:
        MoleculeEnsemble.create(N=10, d=4, seed=0, m=2.0, M_sys=1.0)
        rejected = False
    except DomainError:
        rejected = True
    check("System lighter than one molecule rejected", rejected)


def test_cycle_phases():
    print_section("Fundamental cycle")

    e = MoleculeEnsemble.create(N=1000, d=4, seed=5)
    settings = CycleSettings(T=1.0, steps_per_semiperiod=40, jitter=0.02)
    record = run_cycle(e, settings)
    check("Snapshots cover [0, 2T]", record.times[0] == 0.0 and record.times[-1] == 2.0 and len(record.times) == 81)
    check("Snapshot at T exists", record.times[40] == 1.0)
    check("Phases in order", record.phases[1] == 'ergodic' and record.phases[40] == 'contractive'
          and record.phases[-1] == 'expansive')
    ergodic_end = record.variances[record.phase_indices('ergodic')[-1]]
    contracted = record.variances[record.end_of_contraction()]
    ratio = contracted / ergodic_end
    expected = math.exp(-2.0 * 5.0 * settings.schedule.integral(0.25, 1.0))
    check("Variance contracts by exp(-2 lambda int kappa)", abs(ratio - expected) < 1e-9,
          f"{ratio:.6g} vs {expected:.6g}")
    check("Input ensemble untouched", np.array_equal(e.u, MoleculeEnsemble.create(N=1000, d=4, seed=5).u))
    check("Variance frame columns", list(record.variance_frame().columns) == ['cycle', 't', 'tau', 'phase', 'variance'])


def test_cycle_determinism_and_threads():
    print_section("Determinism across threads")

    e = MoleculeEnsemble.create(N=600, d=4, seed=8)
    one = run_cycle(e, CycleSettings(T=1.0, threads=1), ConstantBeta([0, 0.05, 0, 0, 0, 0, 0, 0]))
    four = run_cycle(e, CycleSettings(T=1.0, threads=4), ConstantBeta([0, 0.05, 0, 0, 0, 0, 0, 0]))
    check("Thread count does not change results", np.array_equal(one.positions, four.positions))

    records, final = run_cycles(e, CycleSettings(T=1.0), 3)
    check("Three cycles chained", [r.cycle_index for r in records] == [0, 1, 2])
    check("Final state is the last record", np.array_equal(final.u, records[-1].final_u))
    check("tau continues across cycles", records[2].tau[0] == 4.0)


def test_no_contraction():
    print_section("Contraction disabled")

    e = MoleculeEnsemble.create(N=800, d=4, seed=2)
    record = run_cycle(e, CycleSettings(T=1.0, contraction=False))
    ratio = record.variances[record.end_of_contraction()] / record.variances[0]
    check("Variance does not collapse", ratio > 0.99, f"ratio {ratio:.4f}")


def test_grid_and_density():
    print_section("Grids and densities")

    grid = GridSpec((-1.0, -1.0), (1.0, 1.0), (4, 4))
    check("Cell volume", abs(grid.cell_volume - 0.25) < 1e-15)
    check("Upper edge lands in the last cell", np.array_equal(grid.locate([[1.0, 1.0]]), [[3, 3]]))

    points = stream(1, 'density').uniform(-1.0, 1.0, size=(5000, 2))
    n2 = density_from_points(points, grid, 5000)
    check("Density integrates to N", abs(n2.integral() - 5000) < 1e-9)

    try:
        grid.locate([[0.0, 2.0]])
        covered = True
    except CoverageError as e:
        covered = False
        escapees = e.escapees
    check("Escapee reported", not covered and escapees == [0])

    paths = np.zeros((3, 2, 2))
    paths[:, 1, 0] = [-0.9, -0.4, 0.1]
    lines = density_from_worldlines(paths, grid)
    check("World line counts each cell once", int(lines.counts.sum()) == 1 + 3, f"counts {lines.counts.sum()}")


def test_wavefunction():
    print_section("Emergent wave function")

    grid = GridSpec((-2.0, -2.0), (2.0, 2.0), (20, 20))
    points = stream(2, 'psi').normal(0.0, 0.5, size=(20000, 2))
    n2 = density_from_points(np.clip(points, -1.99, 1.99), grid, 20000)
    psi = assemble_wavefunction(n2, PlaneWavePhase((3.0, 0.0)))
    check("Born normalisation", abs(psi.norm - 1.0) < 1e-12, f"norm {psi.norm}")
    check("|psi|^2 reproduces n^2 / N", np.allclose(psi.density(), n2.values / n2.N))

    flat = assemble_wavefunction(n2, ConstantPhase())
    check("<psi|psi> = 1", abs(inner_product(flat, flat) - 1.0) < 1e-12)
    overlaps = oscillation_overlap(n2, [0.0, 4.0, 20.0])
    check("Faster phases decouple", overlaps[0] > overlaps[1] > overlaps[2], f"{np.round(overlaps, 4)}")


def test_density_field_and_refinement():
    print_section("Density fields and refinement")

    e = MoleculeEnsemble.create(N=2000, d=4, seed=4, spread=0.5)
    records, _ = run_cycles(e, CycleSettings(T=1.0), 2)
    grid = GridSpec((-3.0,) * 3, (3.0,) * 3, (12, 12, 12))
    n2 = density_field(records, grid)
    check("Density field integrates to N", abs(n2.integral() - 2000) < 1e-9)

    samples = stream(6, 'refine').normal(0.0, 1.0, size=200000)
    sweep = refinement_sweep(np.clip(samples, -4.999, 4.999), -5.0, 5.0, [5, 10, 20], stats.norm.pdf)
    gaps = sweep['l1_gap'].to_numpy()
    check("L1 gap shrinks with the cell size", gaps[0] > gaps[1] > gaps[2], f"gaps {np.round(gaps, 4)}")


if __name__ == "__main__":
    success = run_suite("ENSEMBLES AND DENSITIES", collect_tests(sys.modules[__name__]))
    sys.exit(0 if success else 1)
