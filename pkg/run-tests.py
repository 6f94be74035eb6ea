#!/usr/bin/env python3
"""
Test runner for the cavity spin machine.

Runs the test suite in marker-selected groups so the fast unit tests report
before the long dynamics and acceptance runs start.
"""

import argparse
from pathlib import Path
import subprocess
import sys
from typing import Dict, List

SUITES: Dict[str, List[str]] = {
    "unit": ["-m", "not dynamics and not oracle and not integration and not slow"],
    "oracle": ["-m", "oracle and not slow"],
    "dynamics": ["-m", "dynamics and not integration and not slow"],
    "integration": ["-m", "integration and not slow"],
    "slow": ["-m", "slow", "--no-cov"],
}


def run_suite(name: str, marker_args: List[str], project_root: Path) -> bool:
    """Run one marker-selected group of tests."""
    print(f"\n{'='*60}")
    print(f"Running suite: {name}")
    print(f"{'='*60}")

    cmd = [sys.executable, "-m", "pytest", "tests/", "-v", "--tb=short", *marker_args]
    try:
        result = subprocess.run(cmd, cwd=project_root, check=False)
    except (subprocess.SubprocessError, OSError) as e:
        print(f"Error running suite {name}: {e}")
        return False
    # exit code 5: no tests collected for this selection
    return result.returncode in (0, 5)


def main() -> None:
    """Main test runner function."""
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "suites",
        nargs="*",
        help=f"Suites to run, from {', '.join(SUITES)} (default: every suite except slow)",
    )
    args = parser.parse_args()
    unknown = [name for name in args.suites if name not in SUITES]
    if unknown:
        parser.error(f"Unknown suites: {', '.join(unknown)}")
    selected = args.suites or [name for name in SUITES if name != "slow"]

    project_root = Path(__file__).parent
    results = {name: run_suite(name, SUITES[name], project_root) for name in selected}

    print(f"\n{'='*60}")
    print("TEST SUMMARY")
    print(f"{'='*60}")
    for name, success in results.items():
        print(f"{name}: {'PASSED' if success else 'FAILED'}")
    print(f"{'='*60}")

    sys.exit(0 if all(results.values()) else 1)


if __name__ == "__main__":
    main()
