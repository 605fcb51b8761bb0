import sys
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))
sys.path.append(str(Path(__file__).parent))

import test_concentration
import test_dynamics
import test_ensemble
import test_flow
import test_geometry
import test_handlers
import test_lipschitz
import test_quantization
import test_scenarios
from report_utils import collect_tests, run_suite

SUITES = [
    ("Geometry", test_geometry),
    ("Flow", test_flow),
    ("Dynamics", test_dynamics),
    ("Ensemble", test_ensemble),
    ("Concentration", test_concentration),
    ("Lipschitz", test_lipschitz),
    ("Quantization", test_quantization),
    ("Handlers", test_handlers),
    ("Scenarios", test_scenarios),
]


def run_all_tests():
    """Run every suite and print one summary"""

    tests = []
    for label, module in SUITES:
        tests.extend((f"{label}: {name}", func) for name, func in collect_tests(module))

    success = run_suite("HAMILTON-RANDERS SYSTEMS - TEST SUITE", tests)
    if success:
        print("[SUCCESS] ALL TESTS PASSED!")
    else:
        print("[WARNING] Some tests failed. Review the output above for details.")
    return success


if __name__ == "__main__":
    success = run_all_tests()
    sys.exit(0 if success else 1)
