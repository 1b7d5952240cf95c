import numpy as np
import pytest

from armlet import sparse_softmax


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record one acceptance line; returns ``ok`` so tests can assert on it."""

    def record(number, ok, detail, status=None):
        line = f"criterion {number}: {status or ('PASS' if ok else 'FAIL')}  {detail}"
        request.config._acceptance_lines.append(line)
        print(line)
        return ok

    return record


@pytest.fixture(params=sparse_softmax.available_backends())
def backend(request):
    prev = sparse_softmax.get_backend()
    sparse_softmax.set_backend(request.param)
    yield request.param
    sparse_softmax.set_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
