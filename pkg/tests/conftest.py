import numpy as np
import pytest

from garmentwarp import _backend

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(params=_backend.available())
def backend(request):
    """Run a test once per available kernel backend."""
    prev = _backend.use(request.param)
    yield request.param
    _backend.use(prev)


@pytest.fixture
def report():
    """Record one pass/fail line for the acceptance summary."""

    def record(label, ok, detail):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
