import numpy as np
import pytest

from noisyre.data import RelationSchema

from acceptance_log import LINES


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(LINES):
            terminalreporter.write_line(LINES[number])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def schema5():
    return RelationSchema(("NA", "rel1", "rel2", "rel3", "rel4"))
