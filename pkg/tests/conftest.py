"""Shared fixtures and the acceptance-criteria summary hook."""

from __future__ import annotations

import re

import numpy as np
import pytest

from pelletvision.geometry import ray_directions

_ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}
_CRITERION_RE = re.compile(r"test_criterion_(\d+)_(\w+)")


@pytest.fixture(scope="session")
def fan32():
    return ray_directions(32)


@pytest.fixture(scope="session")
def fan4():
    return ray_directions(4)


@pytest.fixture()
def rng():
    return np.random.default_rng(0xC0FFEE)


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    match = _CRITERION_RE.search(report.nodeid)
    if match:
        number = int(match.group(1))
        _ACCEPTANCE_RESULTS[number] = (match.group(2), report.outcome)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(_ACCEPTANCE_RESULTS):
        name, outcome = _ACCEPTANCE_RESULTS[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(
            f"criterion {number:2d} [{name}]: {status}")
