import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
import yaml

log = logging.getLogger(__name__)

CHECKS_PATH = Path(__file__).resolve().parent.parent / 'config' / 'acceptance_checks.yaml'
SEVERITIES = ('critical', 'warning', 'info')


def load_check_catalog(path: Union[str, Path] = CHECKS_PATH) -> Dict[str, Dict[str, Any]]:
    catalog_file = Path(path)
    if not catalog_file.exists():
        raise FileNotFoundError(f"Acceptance check catalog not found: {path}")
    with open(catalog_file, 'r') as file:
        checks = yaml.safe_load(file)['checks']
    catalog = {}
    for check in checks:
        if check['severity'] not in SEVERITIES:
            raise ValueError(f"{check['check_id']}: unknown severity {check['severity']!r}")
        catalog[check['check_id']] = check
    return catalog


class AcceptanceTracker:
    """Ledger of acceptance checks evaluated during one run."""

    def __init__(self, run_id: str, catalog: Optional[Dict[str, Dict[str, Any]]] = None):
        self.run_id = run_id
        self.catalog = catalog if catalog is not None else load_check_catalog()
        self.results: List[Dict[str, Any]] = []

    def record(self, check_id: str, passed: Optional[bool], value: Any = None,
               threshold: Any = None, notes: str = '') -> bool:
        if check_id not in self.catalog:
            raise KeyError(f"unknown acceptance check {check_id}")
        check = self.catalog[check_id]
        if check['severity'] == 'info':
            status = 'reported'
        else:
            status = 'pass' if passed else 'fail'
        self.results.append({
            'run_id': self.run_id,
            'check_id': check_id,
            'check_name': check['check_name'],
            'category': check['category'],
            'severity': check['severity'],
            'status': status,
            'value': value,
            'threshold': threshold,
            'notes': notes,
        })
        message = f"[{status.upper():8s}] {check_id} {check['check_name']} value={value} threshold={threshold}"
        if status == 'fail' and check['severity'] == 'critical':
            log.error(message)
        elif status == 'fail':
            log.warning(message)
        else:
            log.info(message)
        return status != 'fail'

    def get_checks_df(self) -> pd.DataFrame:
        columns = ['run_id', 'check_id', 'check_name', 'category', 'severity', 'status', 'value', 'threshold', 'notes']
        return pd.DataFrame(self.results, columns=columns)

    def status_of(self, check_id: str) -> Optional[str]:
        for result in reversed(self.results):
            if result['check_id'] == check_id:
                return result['status']
        return None

    @property
    def critical_failures(self) -> List[str]:
        return [r['check_id'] for r in self.results if r['status'] == 'fail' and r['severity'] == 'critical']

    @property
    def all_critical_passed(self) -> bool:
        return not self.critical_failures

    def summary(self) -> Dict[str, int]:
        statuses = [r['status'] for r in self.results]
        return {
            'total': len(statuses),
            'passed': statuses.count('pass'),
            'failed': statuses.count('fail'),
            'reported': statuses.count('reported'),
        }
