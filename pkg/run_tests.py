#!/usr/bin/env python3
"""Test runner for the hybrid ASR toolkit."""

import unittest
import sys
import os
import time
from io import StringIO

# Add the project root to the Python path
project_root = os.path.abspath(os.path.dirname(__file__))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

UNIT_MODULES = [
    'tests.test_textnorm',
    'tests.test_subword',
    'tests.test_ngram',
    'tests.test_fst',
    'tests.test_decoder',
    'tests.test_rescore',
    'tests.test_pipeline',
    'tests.test_scorer',
    'tests.test_config',
    'tests.test_cli',
]
SLOW_MODULES = [
    'tests.test_end_to_end',
]


def run_tests(test_files):
    """Run the given test modules and return (result, seconds)."""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()

    for test_module in test_files:
        try:
            suite.addTest(loader.loadTestsFromName(test_module))
            print(f"✅ Loaded tests from {test_module}")
        except Exception as e:
            print(f"❌ Failed to load tests from {test_module}: {e}")

    stream = StringIO()
    runner = unittest.TextTestRunner(verbosity=2, stream=stream)
    start_time = time.time()
    result = runner.run(suite)
    end_time = time.time()

    if not result.wasSuccessful():
        print(stream.getvalue())
    return result, end_time - start_time


if __name__ == '__main__':
    print("🧪 Hybrid ASR Test Suite")
    print("=" * 50)

    # --fast skips the end-to-end synthetic checks
    modules = UNIT_MODULES if '--fast' in sys.argv[1:] else UNIT_MODULES + SLOW_MODULES
    print("Running tests...")
    result, duration = run_tests(modules)

    print("\n" + "=" * 50)
    print(f"⏱️  Total test time: {duration:.2f} seconds")

    if result.wasSuccessful():
        print("✅ All tests passed!")
        sys.exit(0)
    else:
        print("❌ Some tests failed!")
        print(f"Failures: {len(result.failures)}")
        print(f"Errors: {len(result.errors)}")
        sys.exit(1)
