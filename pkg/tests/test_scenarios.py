import sys
import tempfile
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

import numpy as np
import pandas as pd
import yaml

import hr_pipeline
from handlers.config_manager import RunConfigLoader
from handlers.output_writer import load_manifest
from report_utils import check, collect_tests, print_section, run_suite
from scenarios.builders import build_grid
from scenarios.double_slit import FlightPlan, SlitGeometry, fly, slit_ensemble, two_time_centers

SMALL_COLLAPSE = {
    'scenario': 'collapse',
    'hyperboloid': {'count': 2000},
    'ensemble': {'seed': 20240611, 'N': 400, 'cycles': 2, 'contraction': True},
    'scenario_params': {'sigma_f': 0.1, 'test_points': 60, 'hull_members': 3},
}


def write_config(directory, name, data):
    path = Path(directory) / f"{name}.yaml"
    path.write_text(yaml.safe_dump(data, sort_keys=False))
    return str(path)


def checks_of(out_dir):
    return pd.read_csv(Path(out_dir) / 'checks.csv').set_index('check_id')['status'].to_dict()


def test_collapse_run():
    print_section("Collapse scenario through the CLI")

    with tempfile.TemporaryDirectory() as tmp:
        config = write_config(tmp, 'collapse', SMALL_COLLAPSE)
        out = Path(tmp) / 'out'
        code = hr_pipeline.main(['run', config, '--out', str(out)])
        check("Exit code 0", code == 0, f"exit {code}")

        statuses = checks_of(out)
        for check_id in ('CO001', 'CO002', 'CO003', 'FL001'):
            check(f"{check_id} passed", statuses.get(check_id) == 'pass', str(statuses.get(check_id)))
        check("Interaction class reported", statuses.get('CO004') == 'reported')

        residuals = pd.read_csv(out / 'metastable_residual.csv')
        check("One residual per cycle", list(residuals['cycle']) == [0, 1], str(list(residuals['cycle'])))
        check("Residual evaluated on each cycle's final states", (residuals['states'] == 60).all(),
              str(list(residuals['states'])))
        check("Residual vanishes at every t = (2n+1)T", (residuals['residual'] < 1e-9).all())

        names = {entry['name'] for entry in load_manifest(out)['outputs']}
        check("Artifacts listed in the manifest",
              {'variance.csv', 'collapse.csv', 'metastable_residual.csv', 'collapse_report.json', 'checks.csv'} <= names,
              str(sorted(names)))


def test_reproducible_manifest():
    print_section("Reproducible outputs")

    with tempfile.TemporaryDirectory() as tmp:
        config = write_config(tmp, 'collapse', SMALL_COLLAPSE)
        manifests = []
        for threads in ('1', '3'):
            out = Path(tmp) / f"threads_{threads}"
            hr_pipeline.main(['run', config, '--out', str(out), '--threads', threads])
            manifests.append(load_manifest(out))
        check("Same run id", manifests[0]['run_id'] == manifests[1]['run_id'])
        hashes = [{e['name']: e['sha256'] for e in m['outputs']} for m in manifests]
        check("Byte-identical outputs regardless of threads", hashes[0] == hashes[1])


def test_no_contraction_control():
    print_section("Contraction disabled")

    data = dict(SMALL_COLLAPSE, ensemble=dict(SMALL_COLLAPSE['ensemble'], contraction=False))
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / 'out'
        code = hr_pipeline.main(['run', write_config(tmp, 'control', data), '--out', str(out)])
        statuses = checks_of(out)
        check("Exit code 0", code == 0, f"exit {code}")
        check("No collapse events expected and none seen", statuses.get('CO001') == 'pass')
        check("Variance ratio check skipped", 'CO003' not in statuses)


def test_concentration_suite_run():
    print_section("Concentration suite through the CLI")

    data = {
        'scenario': 'concentration-suite',
        'ensemble': {'seed': 1},
        'scenario_params': {'sphere_samples': 20000, 'gaussian_dim': 100, 'gaussian_samples': 20000},
    }
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / 'out'
        code = hr_pipeline.main(['run', write_config(tmp, 'suite', data), '--out', str(out), '--format', 'json'])
        check("Exit code 0", code == 0, f"exit {code}")
        statuses = checks_of(out)
        check("Sphere and Gaussian tails under their bounds",
              statuses.get('CM001') == 'pass' and statuses.get('CM002') == 'pass', str(statuses))
        check("JSON tables written", (out / 'sphere_tail.json').exists())


def test_decompose_run():
    print_section("Decomposition scenario through the CLI")

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / 'out'
        code = hr_pipeline.main(['decompose', '--out', str(out)])
        check("Exit code 0", code == 0, f"exit {code}")
        statuses = checks_of(out)
        for check_id in ('LP001', 'LP002', 'LP003', 'LP004', 'LP005', 'LP006'):
            check(f"{check_id} passed", statuses.get(check_id) == 'pass', str(statuses.get(check_id)))


def test_correspondence_run():
    print_section("Correspondence scenario through the CLI")

    data = {
        'scenario': 'correspondence',
        'ensemble': {'seed': 5},
        'scenario_params': {'grid_size': 128, 'conservation_steps': 2000},
    }
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / 'out'
        code = hr_pipeline.main(['run', write_config(tmp, 'corr', data), '--out', str(out)])
        check("Exit code 0", code == 0, f"exit {code}")
        statuses = checks_of(out)
        for check_id in ('DY001', 'DY003', 'DY004', 'QU001'):
            check(f"{check_id} passed", statuses.get(check_id) == 'pass', str(statuses.get(check_id)))


def test_double_slit_closed_slit():
    print_section("Double slit with one slit closed")

    data = yaml.safe_load((hr_pipeline.SCENARIO_CONFIGS['double-slit']).read_text())
    data['scenario_params'].update({'molecules_per_slit': 4000, 'closed_slit': 'B'})
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / 'out'
        code = hr_pipeline.main(['run', write_config(tmp, 'slit', data), '--out', str(out)])
        check("Exit code 0", code == 0, f"exit {code}")
        statuses = checks_of(out)
        check("Born normalisation holds", statuses.get('EN001') == 'pass')
        check("Closed slit leaves the open-slit density", statuses.get('DS001') == 'pass')
        check("Visibility not judged with a slit closed", 'DS002' not in statuses)
        check("Density and far-line tables written",
              (out / 'double_slit_density.csv').exists() and (out / 'double_slit_far_line.csv').exists())


def test_double_slit_flights():
    print_section("Double-slit world lines from the ensemble cycles")

    data = yaml.safe_load((hr_pipeline.SCENARIO_CONFIGS['double-slit']).read_text())
    cfg = RunConfigLoader.from_dict(data)
    grid = build_grid(cfg)
    geometry = SlitGeometry(separation=1.0, width=0.1, slit_z=0.0, lambda_eff=0.1)
    plan = FlightPlan.from_config(cfg, geometry, grid)
    check("Flight reaches the screen", plan.steps == 160 and plan.cycles == 8,
          f"steps={plan.steps} cycles={plan.cycles}")
    check("No reduction during the flight", plan.settings.contraction is False)

    center_a, _ = geometry.centers
    paths = fly(slit_ensemble(cfg, np.full(300, center_a), geometry, plan, 'A'), plan, grid)
    check("One sample per step and molecule", paths.shape == (161, 300, 2), str(paths.shape))
    check("Molecules start inside aperture A",
          np.all(np.abs(paths[0, :, 0] - center_a) <= 0.5 * geometry.width + 1e-12))
    check("Molecules end on the screen cell", np.all(paths[-1, :, 1] >= grid.upper[1] - grid.spacing[1]))
    step = float(np.max(np.abs(np.diff(paths[..., 0], axis=0))))
    check("Transverse motion bounded by c_max dt", step <= cfg.limits.c_max * plan.settings.dt + 1e-12,
          f"largest step {step:.4f}")

    centers = two_time_centers(geometry, 50, 8, plan.settings.T, cfg.seed).reshape(8, 50)
    per_molecule = np.sum(centers == center_a, axis=0)
    check("Each molecule passes slit A in half of its internal instants", np.all(per_molecule == 4),
          str(np.unique(per_molecule)))

    two_time = fly(slit_ensemble(cfg, centers.ravel(), geometry, plan, 'two-time'), plan, grid)
    jump = float(np.max(np.abs(np.diff(two_time[..., 0], axis=0))))
    check("Two-time world lines never jump between slits", jump < 0.5 * geometry.separation,
          f"largest step {jump:.4f}")


def test_configuration_exit_codes():
    print_section("Configuration exit codes")

    with tempfile.TemporaryDirectory() as tmp:
        no_seed = write_config(tmp, 'no_seed', {'scenario': 'collapse'})
        check("Missing seed exits 2", hr_pipeline.main(['run', no_seed]) == 2)

        unknown = write_config(tmp, 'unknown', {'scenario': 'teleport', 'ensemble': {'seed': 1}})
        check("Unknown scenario exits 2", hr_pipeline.main(['run', unknown]) == 2)

        broken = Path(tmp) / 'broken.yaml'
        broken.write_text("scenario: [collapse\n")
        check("Malformed YAML exits 2", hr_pipeline.main(['run', str(broken)]) == 2)

        check("Missing file exits 2", hr_pipeline.main(['run', str(Path(tmp) / 'absent.yaml')]) == 2)

    args = hr_pipeline.parse_arguments(['wep', '--seed', '42', '--out', 'results/wep_42'])
    overrides = hr_pipeline.build_overrides(args)
    check("Subcommand names the scenario", overrides['scenario'] == 'wep')
    check("Seed override", overrides['ensemble.seed'] == 42 and overrides['output_dir'] == 'results/wep_42')


if __name__ == "__main__":
    success = run_suite("SCENARIOS AND CLI", collect_tests(sys.modules[__name__]))
    sys.exit(0 if success else 1)
