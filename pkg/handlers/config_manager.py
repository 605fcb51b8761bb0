import copy
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from hr_systems.ensemble import JITTER_LAWS
from hr_systems.errors import ConfigParseError, ConfigValidationError, UnknownScenarioError
from hr_systems.flow import PROFILES

log = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'config'
DEFAULTS_PATH = CONFIG_DIR / 'defaults.yaml'

SCENARIOS = ('double-slit', 'wep', 'collapse', 'concentration-suite', 'decompose', 'correspondence')
SCENARIO_ALIASES = {
    'weak-equivalence': 'wep',
    'collapse-cycle': 'collapse',
    'double_slit': 'double-slit',
    'concentration_suite': 'concentration-suite',
}
BETA_FAMILIES = ('constant', 'linear', 'sinusoidal')
OUTPUT_FORMATS = ('csv', 'json')
UNIT_SYSTEMS = ('natural', 'si')


@dataclass(frozen=True)
class GeometryConfig:
    d: int
    N: int
    metric: Union[str, List[List[float]]]
    bound_box: float


@dataclass(frozen=True)
class BetaConfig:
    family: str
    vector: Optional[List[float]] = None
    matrix: Optional[List[List[float]]] = None
    offset: Optional[List[float]] = None
    amplitude: Optional[List[float]] = None
    wavenumbers: Optional[List[List[float]]] = None
    phase: Optional[List[float]] = None


@dataclass(frozen=True)
class HyperboloidConfig:
    count: int
    sigma_b: float
    time_symmetric: bool


@dataclass(frozen=True)
class FlowConfig:
    T: Optional[float]
    kappa_profile: str
    lambda_c: Optional[float]


@dataclass(frozen=True)
class DynamicsConfig:
    dt: float
    drift_factor: float
    span: float


@dataclass(frozen=True)
class LimitsConfig:
    c_max: float
    L_min: float


@dataclass(frozen=True)
class EnsembleConfig:
    seed: int
    N: int
    m: float
    M_sys: float
    alpha_et: float
    units: str
    spread: float
    jitter: float
    jitter_law: str
    ergodic_fraction: float
    steps_per_semiperiod: int
    contraction: bool
    cycles: int


@dataclass(frozen=True)
class GridConfig:
    lower: List[float]
    upper: List[float]
    cells: List[int]


@dataclass(frozen=True)
class CacheConfig:
    use_redis: bool
    redis_host: Optional[str]
    redis_port: Optional[int]
    ttl: int


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    output_dir: str
    format: str
    threads: int
    geometry: GeometryConfig
    beta: BetaConfig
    hyperboloid: HyperboloidConfig
    flow: FlowConfig
    dynamics: DynamicsConfig
    limits: LimitsConfig
    ensemble: EnsembleConfig
    grid: GridConfig
    cache: CacheConfig
    scenario_params: Dict[str, Any] = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.ensemble.seed

    def to_dict(self) -> Dict[str, Any]:
        """Everything that determines results; output location and threads excluded."""
        data = asdict(self)
        for key in ('output_dir', 'threads', 'cache', 'format'):
            data.pop(key)
        return data

    def param(self, key: str, default: Any = None) -> Any:
        return self.scenario_params.get(key, default)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def _parse_yaml(text: str, source: str) -> Dict[str, Any]:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        problem = getattr(e, 'problem', None) or str(e)
        if mark is not None:
            raise ConfigParseError(f"{source}: {problem}", line=mark.line + 1, column=mark.column + 1) from e
        raise ConfigParseError(f"{source}: {problem}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigValidationError('<root>', f"{source} must contain a mapping, got {type(data).__name__}")
    return data


def deep_merge(base: Dict[str, Any], overlay: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def set_dotted(data: Dict[str, Any], dotted: str, value: Any) -> None:
    node = data
    *parents, leaf = dotted.split('.')
    for part in parents:
        node = node.setdefault(part, {})
    node[leaf] = value


class RunConfigLoader:

    @staticmethod
    def load_raw(config_path: Union[str, Path]) -> Dict[str, Any]:
        config_file = Path(config_path)
        if not config_file.exists():
            raise FileNotFoundError(f"Config file not found: {config_path}")
        with open(config_file, 'r') as file:
            return _parse_yaml(file.read(), str(config_path))

    @staticmethod
    def load_from_yaml(config_path: Optional[Union[str, Path]] = None,
                       overrides: Optional[Dict[str, Any]] = None,
                       defaults_path: Union[str, Path] = DEFAULTS_PATH) -> RunConfig:
        """Defaults, then the run file, then dotted-key overrides; validated."""
        try:
            raw = RunConfigLoader.load_raw(defaults_path)
            if config_path is not None:
                raw = deep_merge(raw, RunConfigLoader.load_raw(config_path))
            for dotted, value in (overrides or {}).items():
                if value is not None:
                    set_dotted(raw, dotted, value)
            config = validate_config(raw)
        except Exception as e:
            log.error(f"Failed to load config: {e}")
            raise
        log.info(f"Loaded config: scenario={config.scenario} seed={config.seed}")
        return config

    @staticmethod
    def from_dict(data: Dict[str, Any], defaults_path: Union[str, Path] = DEFAULTS_PATH) -> RunConfig:
        return validate_config(deep_merge(RunConfigLoader.load_raw(defaults_path), data))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _section(raw: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = raw.get(name)
    if not isinstance(value, dict):
        raise ConfigValidationError(name, "section is missing or not a mapping")
    return value


def _number(section: Dict[str, Any], path: str, key: str, positive: bool = False,
            integer: bool = False, optional: bool = False, minimum: Optional[float] = None,
            maximum: Optional[float] = None):
    field_path = f"{path}.{key}"
    value = section.get(key)
    if value is None:
        if optional:
            return None
        raise ConfigValidationError(field_path, "is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError(field_path, f"must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigValidationError(field_path, f"must be an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigValidationError(field_path, f"must be positive, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigValidationError(field_path, f"must be >= {minimum}, got {value!r}")
    if maximum is not None and value > maximum:
        raise ConfigValidationError(field_path, f"must be <= {maximum}, got {value!r}")
    return int(value) if integer else float(value)


def _choice(section: Dict[str, Any], path: str, key: str, choices) -> str:
    value = section.get(key)
    if value not in choices:
        raise ConfigValidationError(f"{path}.{key}", f"unknown value {value!r}, choose from {sorted(choices)}")
    return value


def _flag(section: Dict[str, Any], path: str, key: str) -> bool:
    value = section.get(key)
    if not isinstance(value, bool):
        raise ConfigValidationError(f"{path}.{key}", f"must be true or false, got {value!r}")
    return value


def _vector(section: Dict[str, Any], path: str, key: str, length: Optional[int] = None,
            optional: bool = True) -> Optional[List[float]]:
    value = section.get(key)
    if value is None:
        if optional:
            return None
        raise ConfigValidationError(f"{path}.{key}", "is required")
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigValidationError(f"{path}.{key}", "must be a list of numbers")
    if length is not None and len(value) != length:
        raise ConfigValidationError(f"{path}.{key}", f"must have length {length}, got {len(value)}")
    return [float(v) for v in value]


def _matrix(section: Dict[str, Any], path: str, key: str, shape) -> Optional[List[List[float]]]:
    value = section.get(key)
    if value is None:
        return None
    rows, cols = shape
    if not isinstance(value, list) or len(value) != rows:
        raise ConfigValidationError(f"{path}.{key}", f"must be a {rows}x{cols} matrix")
    return [_vector({'row': row}, f"{path}.{key}[{i}]", 'row', cols, optional=False) for i, row in enumerate(value)]


def _geometry(raw) -> GeometryConfig:
    section = _section(raw, 'geometry')
    d = _number(section, 'geometry', 'd', integer=True, minimum=2)
    metric = section.get('metric', 'minkowski')
    if isinstance(metric, str):
        if metric != 'minkowski':
            raise ConfigValidationError('geometry.metric', f"unknown metric {metric!r}; use 'minkowski' or a matrix")
    else:
        metric = _matrix(section, 'geometry', 'metric', (d, d))
    return GeometryConfig(
        d=d,
        N=_number(section, 'geometry', 'N', integer=True, minimum=1),
        metric=metric,
        bound_box=_number(section, 'geometry', 'bound_box', positive=True),
    )


def _beta(raw, d: int) -> BetaConfig:
    section = _section(raw, 'beta')
    family = _choice(section, 'beta', 'family', BETA_FAMILIES)
    n = 2 * d
    config = BetaConfig(
        family=family,
        vector=_vector(section, 'beta', 'vector', n),
        matrix=_matrix(section, 'beta', 'matrix', (n, n)),
        offset=_vector(section, 'beta', 'offset', n),
        amplitude=_vector(section, 'beta', 'amplitude', n),
        wavenumbers=_matrix(section, 'beta', 'wavenumbers', (n, n)),
        phase=_vector(section, 'beta', 'phase', n),
    )
    if family == 'linear' and config.matrix is None:
        raise ConfigValidationError('beta.matrix', "is required for the linear family")
    if family == 'sinusoidal' and (config.amplitude is None or config.wavenumbers is None):
        raise ConfigValidationError('beta.amplitude', "amplitude and wavenumbers are required for the sinusoidal family")
    return config


def _ensemble(raw) -> EnsembleConfig:
    section = _section(raw, 'ensemble')
    if section.get('seed') is None:
        raise ConfigValidationError('ensemble.seed', "is required (no entropy defaults)")
    return EnsembleConfig(
        seed=_number(section, 'ensemble', 'seed', integer=True, minimum=0),
        N=_number(section, 'ensemble', 'N', integer=True, minimum=1),
        m=_number(section, 'ensemble', 'm', positive=True),
        M_sys=_number(section, 'ensemble', 'M_sys', positive=True),
        alpha_et=_number(section, 'ensemble', 'alpha_et', positive=True),
        units=_choice(section, 'ensemble', 'units', UNIT_SYSTEMS),
        spread=_number(section, 'ensemble', 'spread', positive=True),
        jitter=_number(section, 'ensemble', 'jitter', minimum=0.0),
        jitter_law=_choice(section, 'ensemble', 'jitter_law', JITTER_LAWS),
        ergodic_fraction=_number(section, 'ensemble', 'ergodic_fraction', positive=True, maximum=1.0),
        steps_per_semiperiod=_number(section, 'ensemble', 'steps_per_semiperiod', integer=True, minimum=4),
        contraction=_flag(section, 'ensemble', 'contraction'),
        cycles=_number(section, 'ensemble', 'cycles', integer=True, minimum=1),
    )


def _grid(raw) -> GridConfig:
    section = _section(raw, 'grid')
    lower = _vector(section, 'grid', 'lower', optional=False)
    upper = _vector(section, 'grid', 'upper', len(lower), optional=False)
    cells = _vector(section, 'grid', 'cells', len(lower), optional=False)
    if any(c < 1 or int(c) != c for c in cells):
        raise ConfigValidationError('grid.cells', "must be positive integers")
    if any(hi <= lo for lo, hi in zip(lower, upper)):
        raise ConfigValidationError('grid.upper', "must exceed grid.lower on every axis")
    return GridConfig(lower=lower, upper=upper, cells=[int(c) for c in cells])


def validate_config(raw: Dict[str, Any]) -> RunConfig:
    scenario = raw.get('scenario')
    if not isinstance(scenario, str):
        raise ConfigValidationError('scenario', "is required")
    scenario = SCENARIO_ALIASES.get(scenario, scenario)
    if scenario not in SCENARIOS:
        raise UnknownScenarioError(f"unknown scenario {scenario!r}, choose from {list(SCENARIOS)}")

    geometry = _geometry(raw)
    flow = _section(raw, 'flow')
    dynamics = _section(raw, 'dynamics')
    limits = _section(raw, 'limits')
    hyperboloid = _section(raw, 'hyperboloid')
    cache = _section(raw, 'cache')
    runtime = _section(raw, 'runtime')
    params = raw.get('scenario_params') or {}
    if not isinstance(params, dict):
        raise ConfigValidationError('scenario_params', "must be a mapping")

    return RunConfig(
        scenario=scenario,
        output_dir=str(raw.get('output_dir') or 'results'),
        format=_choice(runtime, 'runtime', 'format', OUTPUT_FORMATS),
        threads=_number(runtime, 'runtime', 'threads', integer=True, minimum=1),
        geometry=geometry,
        beta=_beta(raw, geometry.d),
        hyperboloid=HyperboloidConfig(
            count=_number(hyperboloid, 'hyperboloid', 'count', integer=True, minimum=1),
            sigma_b=_number(hyperboloid, 'hyperboloid', 'sigma_b', positive=True),
            time_symmetric=_flag(hyperboloid, 'hyperboloid', 'time_symmetric'),
        ),
        flow=FlowConfig(
            T=_number(flow, 'flow', 'T', positive=True, optional=True),
            kappa_profile=_choice(flow, 'flow', 'kappa_profile', PROFILES),
            lambda_c=_number(flow, 'flow', 'lambda_c', positive=True, optional=True),
        ),
        dynamics=DynamicsConfig(
            dt=_number(dynamics, 'dynamics', 'dt', positive=True),
            drift_factor=_number(dynamics, 'dynamics', 'drift_factor', positive=True),
            span=_number(dynamics, 'dynamics', 'span', positive=True),
        ),
        limits=LimitsConfig(
            c_max=_number(limits, 'limits', 'c_max', positive=True),
            L_min=_number(limits, 'limits', 'L_min', positive=True),
        ),
        ensemble=_ensemble(raw),
        grid=_grid(raw),
        cache=CacheConfig(
            use_redis=_flag(cache, 'cache', 'use_redis'),
            redis_host=cache.get('redis_host'),
            redis_port=_number(cache, 'cache', 'redis_port', integer=True, optional=True),
            ttl=_number(cache, 'cache', 'ttl', integer=True, positive=True),
        ),
        scenario_params=params,
    )
