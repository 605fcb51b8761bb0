"""Deterministic persistence of tables, reports and run manifests."""
import hashlib
import json
import logging
import math
import platform
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
import scipy
import yaml

log = logging.getLogger(__name__)

FLOAT_FORMAT = '%.12g'
UNBOUNDED = 'unbounded'
MANIFEST_NAME = 'manifest.json'


def _clean(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isinf(value):
            return UNBOUNDED if value > 0 else f"-{UNBOUNDED}"
        if math.isnan(value):
            return None
        return value
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    return value


def canonical_json(obj: Any) -> str:
    return json.dumps(_clean(obj), sort_keys=True, separators=(',', ':'))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as file:
        for block in iter(lambda: file.read(65536), b''):
            digest.update(block)
    return digest.hexdigest()


class OutputWriter:
    """Writes artifacts under one directory and remembers them for the manifest."""

    def __init__(self, out_dir: Union[str, Path], fmt: str = 'csv'):
        self.out_dir = Path(out_dir)
        self.fmt = fmt
        self.outputs: List[Path] = []
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_table(self, df: pd.DataFrame, name: str, fmt: Optional[str] = None) -> Path:
        fmt = fmt or self.fmt
        if fmt == 'csv':
            path = self.out_dir / f"{name}.csv"
            df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        else:
            path = self.out_dir / f"{name}.json"
            records = _clean(df.to_dict(orient='records'))
            path.write_text(json.dumps(records, sort_keys=True, indent=1) + '\n')
        log.info(f"Wrote {name}: {len(df):,} rows -> {path}")
        return self._track(path)

    def write_report(self, obj: Any, name: str) -> Path:
        path = self.out_dir / f"{name}.json"
        path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + '\n')
        log.info(f"Wrote report {name} -> {path}")
        return self._track(path)

    def _track(self, path: Path) -> Path:
        if path not in self.outputs:
            self.outputs.append(path)
        return path

    def write_manifest(self, scenario: str, config_dict: Dict, seed: int) -> Path:
        manifest = build_manifest(scenario, config_dict, seed, self.outputs, self.out_dir)
        path = self.out_dir / MANIFEST_NAME
        path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + '\n')
        log.info(f"Wrote manifest with {len(manifest['outputs'])} outputs -> {path}")
        return path


def package_versions() -> Dict[str, str]:
    from hr_systems import __version__
    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'pyyaml': yaml.__version__,
        'hr_systems': __version__,
    }


def inputs_hash(config_dict: Dict) -> str:
    return sha256_text(canonical_json(config_dict))


def build_manifest(scenario: str, config_dict: Dict, seed: int, outputs: List[Path],
                   out_dir: Path) -> Dict[str, Any]:
    digest = inputs_hash(config_dict)
    entries = []
    for path in sorted(outputs, key=lambda p: p.name):
        entries.append({
            'name': path.name,
            'path': str(path.relative_to(out_dir)),
            'sha256': file_sha256(path),
            'bytes': path.stat().st_size,
        })
    return {
        'run_id': digest[:12],
        'scenario': scenario,
        'inputs_sha256': digest,
        'seed': seed,
        'versions': package_versions(),
        'outputs': entries,
    }


def load_manifest(out_dir: Union[str, Path]) -> Dict[str, Any]:
    return json.loads((Path(out_dir) / MANIFEST_NAME).read_text())
