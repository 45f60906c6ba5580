import os

import numpy as np
import pytest

_REPORT = []


def pytest_addoption(parser):
    parser.addoption(
        "--long", action="store_true", default=False,
        help="run the full-size structure recovery test (also SQRGM_LONG=1)",
    )


def long_enabled(config):
    return config.getoption("--long") or os.environ.get("SQRGM_LONG") == "1"


@pytest.fixture
def report():
    """Record one acceptance line: ``report(number, ok, detail)``."""

    def add(number, ok, detail):
        _REPORT.append((number, "PASS" if ok else "FAIL", detail))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")

    return add


@pytest.fixture
def report_skip():
    def add(number, detail):
        _REPORT.append((number, "SKIP", detail))

    return add


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(_REPORT):
        terminalreporter.write_line(f"criterion {number:2d}: {status} {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
