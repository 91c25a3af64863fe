from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from coroute.scenario import load_scenario

FIXTURES = Path(__file__).parent / "fixtures"
LAB = Path(__file__).parent.parent / "src" / "coroute" / "data" / "lab_12pt.json"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text()


def fixture_doc(name: str) -> dict:
    return json.loads(fixture_text(name))


@pytest.fixture
def t1():
    return load_scenario(fixture_text("T1.json"))


@pytest.fixture
def t3():
    return load_scenario(fixture_text("T3.json"))


@pytest.fixture
def lab():
    return load_scenario(LAB.read_text())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.verdict_lines():
        terminalreporter.write_line(line)
