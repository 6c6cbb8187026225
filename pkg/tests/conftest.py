"""Shared fixtures and the acceptance-criteria reporting hook."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles/generators/reference

from dbnet import dsl
from dbnet.datatypes import builtin_catalog
from dbnet.scenarios import scenario_text


@pytest.fixture(scope="session")
def catalog():
    return builtin_catalog()


@pytest.fixture(scope="session")
def ticket_scenario():
    return dsl.elaborate(dsl.parse(scenario_text("ticket")))


@pytest.fixture(scope="session")
def nu_demo_scenario():
    return dsl.elaborate(dsl.parse(scenario_text("nu_demo")))


@pytest.fixture(scope="session")
def relay_scenario():
    return dsl.elaborate(dsl.parse(scenario_text("relay")))


# --- acceptance reporting -------------------------------------------------------

_acceptance_results: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): marks a test as one acceptance criterion"
    )


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    marker_name = getattr(report, "_acceptance_name", None)
    if marker_name:
        _acceptance_results[marker_name] = report.outcome


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and marker.args:
        report._acceptance_name = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance_results):
        outcome = _acceptance_results[name]
        word = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{name}: {word}")
