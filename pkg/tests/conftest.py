import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(criterion, passed, detail):
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"[{status}] criterion {criterion}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
