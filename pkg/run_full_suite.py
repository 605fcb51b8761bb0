import subprocess
import sys
import logging
from pathlib import Path
from datetime import datetime

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s | %(levelname)-8s | %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)
log = logging.getLogger(__name__)

ROOT = Path(__file__).resolve().parent
SCENARIO_DIR = ROOT / 'config' / 'scenarios'


def print_header(title):

    print(f"\n{'='*70}")
    print(f"  {title}")
    print(f"{'='*70}\n")


def run_command(command, description):

    log.info(f" {description}")
    result = subprocess.run(command, cwd=ROOT, capture_output=True, text=True)
    if result.returncode == 0:
        log.info(f" {description} - COMPLETED")
        return True
    log.error(f" {description} - FAILED (exit {result.returncode})")
    log.error(f"Error: {result.stderr[-2000:]}")
    return False


def main():
    """Run every scenario config, then the test suite"""
    start_time = datetime.now()

    print_header("HAMILTON-RANDERS FULL SUITE - STARTING")

    configs = sorted(SCENARIO_DIR.glob('*.yaml'))
    outcomes = {}

    print_header(f"STEP 1: Running {len(configs)} Scenarios")
    for config in configs:
        outcomes[config.stem] = run_command(
            [sys.executable, 'hr_pipeline.py', 'run', str(config.relative_to(ROOT))],
            f"Scenario {config.stem}",
        )

    print_header("STEP 2: Running Comprehensive Tests")
    tests_ok = run_command([sys.executable, str(Path('tests') / 'test_all_features.py')], "Test Suite")
    if not tests_ok:
        log.warning(" Some tests failed - review output")

    duration = (datetime.now() - start_time).total_seconds()
    failed = [name for name, ok in outcomes.items() if not ok]

    print_header("SUITE COMPLETED" if not failed and tests_ok else "SUITE FINISHED WITH FAILURES")
    for name, ok in outcomes.items():
        log.info(f"   {'PASS' if ok else 'FAIL'}  {name}")
    log.info(f"⏱  Total Duration: {int(duration)}s ({duration/60:.1f} minutes)")

    return not failed and tests_ok


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
