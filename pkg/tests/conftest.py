"""Per-criterion PASS/FAIL lines for the acceptance suite.

Tests carry ``@pytest.mark.criterion(number, title)``. A criterion passes when
every test tagged with it passed; a skipped or missing test counts as a failure.
"""

from collections import defaultdict

import pytest

_outcomes: dict[int, list[bool]] = defaultdict(list)
_titles: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion tag")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _titles[mark.args[0]] = mark.args[1]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    numbers = [v for k, v in report.user_properties if k == "criterion"]
    if not numbers:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[numbers[0]].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _titles:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_titles):
        results = _outcomes.get(number, [])
        verdict = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"{verdict} criterion {number:2d}: {_titles[number]}")
