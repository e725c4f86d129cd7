import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    # a criterion fails if any phase fails; otherwise the call phase decides
    prev = _CRITERIA.get(number, (title, "PASS", 0.0))
    status = prev[1]
    if rep.failed:
        status = "FAIL"
    elif rep.skipped and rep.when == "call":
        status = "SKIP"
    _CRITERIA[number] = (title, status, prev[2] + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, duration = _CRITERIA[number]
        tr.write_line(f"criterion {number:2d} {status:4s}  {title}  ({duration:.1f}s)")
