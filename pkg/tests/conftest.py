import logging

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_warnings():
    # non-monotone caps in random rosters are expected; keep the output readable
    logging.getLogger("outreach").setLevel(logging.ERROR)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        number, title = mark.args
        status = "PASS" if rep.passed else "FAIL"
        _CRITERIA.append((number, status, rep.duration, title))
        # shown live with -s, and again in the summary section
        print(f"\nacceptance {number:>2}: {status} ({rep.duration:.2f}s) {title}")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, duration, title in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {number:>2}: {status} ({duration:.2f}s) {title}")
