import numpy as np
import pytest

from leximin_lottery.blackbox import ExhaustiveBlackBox

from helpers import two_state_fixture

# Lines reported by the acceptance suite, echoed once at the end of the run.
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def fixture_states():
    return two_state_fixture()


@pytest.fixture
def fixture_blackbox(fixture_states):
    return ExhaustiveBlackBox(fixture_states, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
