from .cache_manager import CacheManager, cache_key, cached_computation
from .check_tracker import AcceptanceTracker, load_check_catalog
from .config_manager import RunConfig, RunConfigLoader, validate_config
from .output_writer import OutputWriter, build_manifest, file_sha256, inputs_hash

__all__ = [
    'CacheManager',
    'cache_key',
    'cached_computation',
    'AcceptanceTracker',
    'load_check_catalog',
    'RunConfig',
    'RunConfigLoader',
    'validate_config',
    'OutputWriter',
    'build_manifest',
    'file_sha256',
    'inputs_hash',
]
