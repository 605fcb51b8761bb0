import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))


def print_section(title):

    print(f"\n{'='*70}")
    print(f"  {title}")
    print(f"{'='*70}\n")


def print_result(test_name, passed, message=""):

    status = "[PASS]" if passed else "[FAIL]"
    print(f"{status} | {test_name}")
    if message:
        print(f"       {message}")


def check(test_name, passed, message=""):
    """Print the result line and fail the enclosing test when ``passed`` is false."""
    passed = bool(passed)
    print_result(test_name, passed, message)
    assert passed, f"{test_name}: {message}" if message else test_name


def run_suite(title, tests):
    """Run (name, func) pairs; a test passes when it returns without raising."""

    print("\n" + "="*70)
    print(f"  {title}")
    print("="*70)

    results = []
    for test_name, test_func in tests:
        try:
            test_func()
            results.append((test_name, True))
        except AssertionError as e:
            print(f"\n[FAIL] {test_name}: {e}")
            results.append((test_name, False))
        except Exception as e:
            print(f"\n[ERROR] CRITICAL ERROR in {test_name}: {type(e).__name__}: {e}")
            results.append((test_name, False))

    print_section("TEST SUMMARY")

    passed = sum(1 for _, result in results if result)
    total = len(results)

    for test_name, result in results:
        status = "[PASS]" if result else "[FAIL]"
        print(f"{status} | {test_name}")

    print(f"\n{'='*70}")
    print(f"OVERALL: {passed}/{total} tests passed ({passed/max(total, 1)*100:.1f}%)")
    print(f"{'='*70}\n")

    return passed == total


def collect_tests(module):
    """(name, func) for every test_* function of a module, in definition order."""
    return [
        (name[5:].replace('_', ' ').capitalize(), func)
        for name, func in vars(module).items()
        if name.startswith('test_') and callable(func)
    ]
