import warnings

import pytest

from corrprophet.distributions import DiscreteDistribution
from corrprophet.model import LinearInstance, gen_tower2

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def tower2_small():
    return gen_tower2(2, 0.1)


@pytest.fixture
def footnote_instance():
    coin = DiscreteDistribution.from_pairs([(0.0, 0.5), (1.0, 0.5)])
    return LinearInstance(3, 2, [(0, 0, 1.0), (1, 1, 1.0), (2, 0, 0.99), (2, 1, 0.99)], [coin, coin])


@pytest.fixture(autouse=True)
def _quiet_epsilon_clamp():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="epsilon raised")
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
