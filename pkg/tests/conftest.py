import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from atmcoord.classic import chicken, coordination, matching_pennies, prisoners_dilemma  # noqa: E402
from atmcoord.game import NormalFormGame  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def random_game(seed: int) -> NormalFormGame:
    """2-3 players, 2-4 actions each, utilities uniform on [-1, 1]."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    shape = tuple(int(m) for m in rng.integers(2, 5, size=n))
    return NormalFormGame.from_tensors([rng.uniform(-1, 1, size=shape) for _ in range(n)])


@pytest.fixture
def pd():
    return prisoners_dilemma()


@pytest.fixture
def mp():
    return matching_pennies()


@pytest.fixture
def chk():
    return chicken()


@pytest.fixture
def coord():
    return coordination()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
