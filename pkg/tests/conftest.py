import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

GOLDEN = Path(__file__).parent / "golden"

_criteria: dict[int, tuple[str, list[str]]] = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, name = marker
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        _criteria.setdefault(number, (name, []))[1].append(outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        name, outcomes = _criteria[number]
        if "FAIL" in outcomes:
            verdict = "FAIL"
        elif all(o == "SKIP" for o in outcomes):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"criterion {number}: {name} ... {verdict} ({len(outcomes)} checks)")


@pytest.fixture
def three_logs():
    return [
        "instruction cache parity error corrected",
        "generating core.2275",
        "ciod: failed to read message prefix on control stream (CioStream socket to 172.16.96.116:33569",
    ]
