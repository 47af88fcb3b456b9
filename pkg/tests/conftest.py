import numpy as np
import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record():
    """Record a one-line pass/fail verdict for an acceptance criterion."""

    def _record(number, title, ok, detail):
        ACCEPTANCE_LINES.append(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
