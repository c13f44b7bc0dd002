import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from radcal.config import default_config
from radcal.sensor import BAND_ORDER, default_sweep

settings.register_profile(
    "radcal", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("radcal")


@pytest.fixture(scope="session")
def config():
    return default_config()


@pytest.fixture(scope="session")
def sweeps():
    """Noise-free default sweep for every band at both gains."""
    return {band: default_sweep(band) for band in BAND_ORDER}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ----------------------------------------------------------------
# Tests marked ``criterion(n, "title")`` get one PASS/FAIL line each at the end of the run.

_criteria: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _criteria.setdefault(mark.args[0], [mark.args[1], []])


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    item_mark = getattr(report, "_criterion", None)
    if item_mark is not None:
        _criteria[item_mark][1].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark:
        outcome.get_result()._criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcomes = _criteria[number]
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status:<7} {title} ({len(outcomes)} checks)")
