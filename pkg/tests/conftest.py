"""Shared fixtures: cached bundled-scenario runs and the acceptance report.

Bundled runs are deterministic, so one execution per scenario is shared
by every test that needs it. Acceptance tests register one PASS/FAIL
line each; the terminal summary hook prints them whether or not stdout
capture is active.
"""

import contextlib

import pytest

from ccfsim.engine import run
from ccfsim.experiments import load_bundled

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def bundled():
    """Memoized runner: bundled(name) -> RunResult, executed once."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run(load_bundled(name))
        return cache[name]

    return get


@pytest.fixture
def acceptance():
    """Context manager recording one criterion line, PASS or FAIL."""

    @contextlib.contextmanager
    def report(label):
        try:
            yield
        except BaseException:
            _ACCEPTANCE_LINES.append(f"criterion {label}: FAIL")
            raise
        _ACCEPTANCE_LINES.append(f"criterion {label}: PASS")

    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
