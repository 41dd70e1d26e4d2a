import numpy as np
import pytest

from panotrack.core import MatchingMatrix

_acceptance = []
MATCHINGS_SEEN = {"count": 0}


@pytest.fixture(autouse=True)
def _check_every_matching(monkeypatch):
    """Re-check row/column sums of every MatchingMatrix built during a test."""
    original = MatchingMatrix.__post_init__

    def checked(self):
        original(self)
        v = np.asarray(self.values)
        if v.size:
            assert v.sum(axis=1).max() <= 1 and v.sum(axis=0).max() <= 1
        MATCHINGS_SEEN["count"] += 1

    monkeypatch.setattr(MatchingMatrix, "__post_init__", checked)
    yield


def pytest_runtest_logreport(report):
    if report.when == "call" and "acceptance" in report.keywords:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{mark}] {name}")
