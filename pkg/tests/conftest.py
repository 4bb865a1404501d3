import pytest

from gbmo import BACKEND

# (criterion, passed, detail) lines collected by test_acceptance
ACCEPTANCE = []


def pytest_report_header(config):
    return f"gbmo kernel backend: {BACKEND}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(1234)
