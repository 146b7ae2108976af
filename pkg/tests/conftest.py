from __future__ import annotations

import pytest

from replidyn.game_model import ECOMMERCE, RETAIL

_ACCEPTANCE: dict[int, list[str]] = {}


@pytest.fixture
def retail():
    return RETAIL


@pytest.fixture
def ecommerce():
    return ECOMMERCE


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for key, value in report.user_properties:
        if key == "criterion":
            _ACCEPTANCE.setdefault(value, []).append(report.outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker:
            item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_ACCEPTANCE):
        outcomes = _ACCEPTANCE[criterion]
        failed = sum(o != "passed" for o in outcomes)
        status = "PASS" if not failed else "FAIL"
        terminalreporter.write_line(
            f"criterion {criterion}: {status} ({len(outcomes) - failed}/{len(outcomes)} checks passed)"
        )
