import numpy as np
import pytest

from dxtext.noise import make_rng
from dxtext.vocab import Vocabulary, synthetic_vocabulary

# acceptance verdicts collected for the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture(scope="session")
def small_vocab():
    return synthetic_vocabulary(300, 8, seed=3)


@pytest.fixture
def witness_vocab():
    # w, x1, x2, x3, x4 on the plane
    pts = [(0, 0), (1.5, 0), (-1, 0), (-1, 2), (-2.5, 0)]
    return Vocabulary(("w", "x1", "x2", "x3", "x4"), np.array(pts, dtype=float), name="witness")
