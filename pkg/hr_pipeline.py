import argparse
import logging
import sys
import traceback
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

sys.path.append(str(Path(__file__).parent))

from handlers.cache_manager import CacheManager
from handlers.check_tracker import AcceptanceTracker
from handlers.config_manager import CONFIG_DIR, RunConfig, RunConfigLoader
from handlers.output_writer import OutputWriter, inputs_hash
from hr_systems.errors import ConfigParseError, ConfigValidationError, HRError, UnknownScenarioError
from scenarios import SCENARIO_RUNNERS, ScenarioContext

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s | %(levelname)-8s | %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)
log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

SCENARIO_CONFIGS = {
    'concentration-suite': CONFIG_DIR / 'scenarios' / 'concentration_suite.yaml',
    'double-slit': CONFIG_DIR / 'scenarios' / 'double_slit.yaml',
    'wep': CONFIG_DIR / 'scenarios' / 'wep.yaml',
    'collapse': CONFIG_DIR / 'scenarios' / 'collapse.yaml',
    'decompose': CONFIG_DIR / 'scenarios' / 'decompose.yaml',
    'correspondence': CONFIG_DIR / 'scenarios' / 'correspondence.yaml',
}


def parse_arguments(argv: Optional[List[str]] = None):
    """Parse command-line arguments"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='Override ensemble.seed')
    common.add_argument('--out', type=str, default=None, help='Output directory')
    common.add_argument('--threads', type=int, default=None, help='Worker threads for chunked sampling')
    common.add_argument('--format', type=str, choices=['csv', 'json'], default=None, help='Table format')
    common.add_argument('--verbose', action='store_true', help='Debug logging')

    parser = argparse.ArgumentParser(
        description='Hamilton-Randers desk-scale experiments',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python hr_pipeline.py run config/scenarios/collapse.yaml
  python hr_pipeline.py wep --seed 42 --out results/wep_42
  python hr_pipeline.py concentration-suite --threads 4
        """
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    run_parser = subparsers.add_parser('run', parents=[common], help='Run the scenario named in a config file')
    run_parser.add_argument('config', type=str, help='Scenario YAML')

    for name, default_config in SCENARIO_CONFIGS.items():
        sub = subparsers.add_parser(name, parents=[common], help=f"Run the {name} scenario")
        sub.add_argument('config', type=str, nargs='?', default=str(default_config),
                         help=f"Scenario YAML (default: {default_config.relative_to(CONFIG_DIR.parent)})")

    return parser.parse_args(argv)


def build_overrides(args) -> Dict[str, object]:
    return {
        'scenario': None if args.command == 'run' else args.command,
        'ensemble.seed': args.seed,
        'output_dir': args.out,
        'runtime.threads': args.threads,
        'runtime.format': args.format,
    }


def write_run_outputs(config: RunConfig, writer: OutputWriter, tracker: AcceptanceTracker) -> Path:
    writer.write_table(tracker.get_checks_df(), 'checks', fmt='csv')
    return writer.write_manifest(config.scenario, config.to_dict(), config.seed)


def run_scenario(config: RunConfig) -> bool:
    """Run one scenario; True when every critical check passed."""
    run_start = datetime.now(timezone.utc)
    run_id = inputs_hash(config.to_dict())[:12]

    log.info("\n" + "="*70)
    log.info("HAMILTON-RANDERS SCENARIO RUN")
    log.info("="*70)
    log.info(f"Run ID: {run_id}")
    log.info(f"Scenario: {config.scenario}")
    log.info(f"Seed: {config.seed}")
    log.info(f"Output: {config.output_dir}")
    log.info("="*70 + "\n")

    writer = OutputWriter(config.output_dir, config.format)
    tracker = AcceptanceTracker(run_id)
    cache = CacheManager.from_config(config.cache)
    ctx = ScenarioContext(config=config, writer=writer, tracker=tracker, cache=cache)

    log.info("STEP 1: Running scenario")
    SCENARIO_RUNNERS[config.scenario](ctx)

    log.info("STEP 2: Writing checks and manifest")
    manifest_path = write_run_outputs(config, writer, tracker)

    summary = tracker.summary()
    passed = tracker.all_critical_passed
    log.info("\n" + "="*70)
    log.info(" SCENARIO COMPLETED" if passed else " SCENARIO FAILED CRITICAL CHECKS")
    log.info("="*70)
    log.info("\n SUMMARY:")
    log.info(f"   Run ID:          {run_id}")
    log.info(f"   Checks:          {summary['total']}")
    log.info(f"   Passed:          {summary['passed']}")
    log.info(f"   Failed:          {summary['failed']}")
    log.info(f"   Reported:        {summary['reported']}")
    if not passed:
        log.info(f"   Critical fails:  {', '.join(tracker.critical_failures)}")
    log.info(f"   Manifest:        {manifest_path}")
    log.info(f"   Cache:           {cache.get_stats()}")
    log.info(f"   Duration:        {(datetime.now(timezone.utc) - run_start).total_seconds():.1f}s")
    return passed


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_arguments(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        config = RunConfigLoader.load_from_yaml(args.config, build_overrides(args))
    except ConfigParseError as e:
        log.error(f"Config parse error: {e}")
        return EXIT_CONFIG
    except (ConfigValidationError, UnknownScenarioError, FileNotFoundError) as e:
        log.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG

    try:
        return EXIT_OK if run_scenario(config) else EXIT_FAILED
    except HRError as e:
        log.error(f"\n SCENARIO FAILED: {type(e).__name__}: {e}")
        log.error(traceback.format_exc())
        return EXIT_FAILED
    except Exception as e:
        log.error(f"\n SCENARIO FAILED: {e}")
        log.error(traceback.format_exc())
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
