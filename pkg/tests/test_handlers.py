import sys
import json
import math
import tempfile
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

import pandas as pd

from handlers.cache_manager import CacheManager, cache_key, cached_computation
from handlers.check_tracker import AcceptanceTracker, load_check_catalog
from handlers.config_manager import CONFIG_DIR, RunConfigLoader
from handlers.output_writer import OutputWriter, canonical_json, inputs_hash, load_manifest
from hr_systems.errors import ConfigParseError, ConfigValidationError, UnknownScenarioError
from report_utils import check, collect_tests, print_section, run_suite


def expect_error(func, error):
    try:
        func()
    except error as e:
        return e
    return None


def test_config_loading():
    print_section("Run configuration")

    config = RunConfigLoader.load_from_yaml(CONFIG_DIR / 'scenarios' / 'collapse.yaml')
    check("Scenario read from the file", config.scenario == 'collapse')
    check("Seed read from the file", config.seed == 20240611)
    check("Defaults fill unspecified sections", config.geometry.d == 4 and config.flow.kappa_profile == 'smoothstep')

    overridden = RunConfigLoader.load_from_yaml(
        CONFIG_DIR / 'scenarios' / 'collapse.yaml',
        {'ensemble.seed': 99, 'runtime.threads': 4, 'output_dir': None},
    )
    check("Dotted overrides applied", overridden.seed == 99 and overridden.threads == 4)
    check("None overrides ignored", overridden.output_dir == config.output_dir)

    threaded = RunConfigLoader.load_from_yaml(CONFIG_DIR / 'scenarios' / 'collapse.yaml', {'runtime.threads': 8})
    check("Thread count does not change the inputs hash",
          inputs_hash(threaded.to_dict()) == inputs_hash(config.to_dict()))

    alias = RunConfigLoader.from_dict({'scenario': 'weak-equivalence', 'ensemble': {'seed': 1}})
    check("Scenario aliases resolved", alias.scenario == 'wep')


def test_config_errors():
    print_section("Configuration errors")

    missing = expect_error(lambda: RunConfigLoader.from_dict({'scenario': 'collapse'}), ConfigValidationError)
    check("Missing seed rejected", missing is not None and missing.field == 'ensemble.seed')

    unknown = expect_error(lambda: RunConfigLoader.from_dict({'scenario': 'teleport', 'ensemble': {'seed': 1}}),
                           UnknownScenarioError)
    check("Unknown scenario rejected", unknown is not None)

    short = expect_error(
        lambda: RunConfigLoader.from_dict({'scenario': 'collapse', 'ensemble': {'seed': 1},
                                           'beta': {'vector': [0.0, 0.1]}}),
        ConfigValidationError,
    )
    check("Beta vector of the wrong length rejected", short is not None and short.field == 'beta.vector')

    profile = expect_error(
        lambda: RunConfigLoader.from_dict({'scenario': 'collapse', 'ensemble': {'seed': 1},
                                           'flow': {'kappa_profile': 'step'}}),
        ConfigValidationError,
    )
    check("Unknown kappa profile rejected", profile is not None and profile.field == 'flow.kappa_profile')

    with tempfile.TemporaryDirectory() as tmp:
        broken = Path(tmp) / 'broken.yaml'
        broken.write_text("scenario: collapse\nensemble:\n  seed: [1, 2\n")
        parse = expect_error(lambda: RunConfigLoader.load_from_yaml(broken), ConfigParseError)
        check("Malformed YAML reports a line", parse is not None and parse.line is not None, str(parse))

    absent = expect_error(lambda: RunConfigLoader.load_from_yaml('no/such/file.yaml'), FileNotFoundError)
    check("Missing file reported", absent is not None)


def test_cache_manager():
    print_section("Result cache")

    cache = CacheManager(use_redis=False)
    check("Memory backend by default", cache.cache_type == 'memory')

    calls = []

    def compute():
        calls.append(1)
        return {'value': 42}

    first = cached_computation(cache, 'demo', {'n': 1}, compute)
    second = cached_computation(cache, 'demo', {'n': 1}, compute)
    check("Computed once, then served", len(calls) == 1 and first == second == {'value': 42})
    cached_computation(cache, 'demo', {'n': 1}, compute, force_refresh=True)
    check("force_refresh recomputes", len(calls) == 2)
    check("Payload order does not change the key", cache_key('x', {'a': 1, 'b': 2}) == cache_key('x', {'b': 2, 'a': 1}))

    cache.set(cache_key('other', {}), [1, 2])
    check("Namespace clear", cache.clear('demo') == 1 and cache.exists(cache_key('other', {})))
    stats = cache.get_stats()
    check("Stats count hits and misses", stats['hits'] == 1 and stats['misses'] == 1, str(stats))

    unreachable = CacheManager(redis_host='127.0.0.1', redis_port=1, use_redis=True)
    check("Unreachable redis falls back to memory", unreachable.cache_type == 'memory')


def test_output_writer():
    print_section("Output writer and manifest")

    df = pd.DataFrame({'rho': [0.1, 0.2], 'empirical': [0.3, 0.01]})
    report = {'bound': math.inf, 'missing': math.nan, 'ok': True}

    with tempfile.TemporaryDirectory() as tmp:
        hashes = []
        for name in ('a', 'b'):
            writer = OutputWriter(Path(tmp) / name)
            writer.write_table(df, 'tail')
            writer.write_report(report, 'summary')
            writer.write_manifest('collapse', {'seed': 1}, 1)
            manifest = load_manifest(Path(tmp) / name)
            hashes.append([entry['sha256'] for entry in manifest['outputs']])

        check("Manifest lists outputs by name", [e['name'] for e in manifest['outputs']] == ['summary.json', 'tail.csv'])
        check("Identical runs give identical hashes", hashes[0] == hashes[1])
        check("run_id is the inputs hash prefix", manifest['run_id'] == inputs_hash({'seed': 1})[:12])

        saved = json.loads((Path(tmp) / 'a' / 'summary.json').read_text())
        check("Infinity written as 'unbounded'", saved['bound'] == 'unbounded')
        check("NaN written as null", saved['missing'] is None)

        json_writer = OutputWriter(Path(tmp) / 'c', fmt='json')
        path = json_writer.write_table(df, 'tail')
        check("JSON tables are record lists", path.suffix == '.json' and len(json.loads(path.read_text())) == 2)

    check("Canonical JSON sorts keys", canonical_json({'b': 1, 'a': 2}) == '{"a":2,"b":1}')


def test_acceptance_tracker():
    print_section("Acceptance tracker")

    catalog = load_check_catalog()
    check("Catalog covers the Lipschitz checks", all(f"LP00{i}" in catalog for i in range(1, 7)))

    tracker = AcceptanceTracker('run-1', catalog)
    tracker.record('CM001', True, 0.31, 0.76)
    tracker.record('CM003', False, 0.317, 0.303)
    tracker.record('CO001', False, 2.0, 1.0)
    check("Info checks are reported, not judged", tracker.status_of('CM003') == 'reported')
    check("Critical failure listed", tracker.critical_failures == ['CO001'] and not tracker.all_critical_passed)
    check("Summary counts", tracker.summary() == {'total': 3, 'passed': 1, 'failed': 1, 'reported': 1})
    check("Checks frame", len(tracker.get_checks_df()) == 3 and tracker.get_checks_df()['run_id'].eq('run-1').all())

    unknown = expect_error(lambda: tracker.record('ZZ999', True), KeyError)
    check("Unknown check id rejected", unknown is not None)


if __name__ == "__main__":
    success = run_suite("HANDLERS", collect_tests(sys.modules[__name__]))
    sys.exit(0 if success else 1)
