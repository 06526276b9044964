import time

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []
FULL_SUITE_LIMIT_S = 600.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion and print it."""

    def record(criterion: int, passed: bool, detail: str):
        line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_sessionstart(session):
    session.config._suite_start = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - config._suite_start
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
        ok = elapsed < FULL_SUITE_LIMIT_S
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'} criterion 9: full suite ran in {elapsed:.1f} s "
            f"(limit {FULL_SUITE_LIMIT_S:.0f} s)")
