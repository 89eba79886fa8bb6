import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA = {}
_OUTCOMES = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if item.name.startswith("test_criterion_"):
            doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
            _CRITERIA[item.nodeid] = doc


def pytest_runtest_logreport(report):
    if report.nodeid in _CRITERIA and (report.when == "call" or report.outcome != "passed"):
        if report.nodeid not in _OUTCOMES or report.outcome != "passed":
            _OUTCOMES[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, title in _CRITERIA.items():
        outcome = _OUTCOMES.get(nodeid, "not run")
        mark = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{mark}  {title}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240611)
