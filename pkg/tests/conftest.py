from pathlib import Path

import pytest

from vphi.ir import parse_program

PROGRAMS = Path(__file__).parent / "programs"

# filled by test_acceptance, printed after the run
ACCEPTANCE_LINES: list[str] = []


def load(name):
    return parse_program((PROGRAMS / name).read_text())


@pytest.fixture
def e1():
    return load("e1.ir")


@pytest.fixture
def e1_mul():
    return load("e1_mul.ir")


@pytest.fixture
def e2():
    return load("e2.ir")


@pytest.fixture
def programs_dir():
    return PROGRAMS


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
