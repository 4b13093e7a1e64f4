"""Shared fixtures.

The full 45-point reference sweep and the robustness suite are the two
expensive things the tests need; both are session-scoped so they run once
and every module (including the acceptance gate) reuses the same result.
Each fixture is timed after a kernel warm-up call so JIT compilation never
pollutes the wall-clock numbers the acceptance tests assert on.
"""

import time

import pytest

from quadinfo import _accel
from quadinfo.config import load_config
from quadinfo.pipeline import robustness_suite, run_sweep


@pytest.fixture(scope="session")
def reference_config():
    return load_config("reference")


@pytest.fixture(scope="session")
def reference_sweep(reference_config):
    """(SweepResult, elapsed_seconds) for the reference preset."""
    _accel.warmup()
    t0 = time.perf_counter()
    result = run_sweep(reference_config)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def reference_robustness(reference_config):
    """(RobustnessReport, elapsed_seconds) over every (nb, weighting) variant."""
    _accel.warmup()
    t0 = time.perf_counter()
    report = robustness_suite(reference_config)
    return report, time.perf_counter() - t0
