import numpy as np
import pytest

from lindley_laplace.core import LaplaceParams, ProcessConfig


def make_cfg(mu, sigma=1.0, x=1.0, h=None):
    return ProcessConfig(LaplaceParams(mu, sigma), x, h)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_acceptance: dict[int, tuple[str, bool]] = {}


def pytest_runtest_logreport(report):
    item_marker = getattr(report, "acceptance", None)
    if item_marker is None:
        return
    number, label = item_marker
    failed = report.failed or (report.when == "call" and report.skipped)
    prev = _acceptance.get(number, (label, True))[1]
    if report.when == "call" or failed:
        _acceptance[number] = (label, prev and not failed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result().acceptance = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        label, ok = _acceptance[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {label}")
