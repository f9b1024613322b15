from fractions import Fraction as F

import pytest

from dso_tree.instances import single_bottleneck, three_link_tree
from dso_tree.network import build_network
from dso_tree.piecewise import StepFunction


def step(a, b, rate):
    return StepFunction((F(a), F(b)), (F(rate),))


@pytest.fixture
def tree3():
    return build_network({1: 3, 2: 3, 3: 0}, {1: 1, 2: 1, 3: 2}, {1: 1, 2: 2, 3: 1})


@pytest.fixture
def queued_link():
    """mu = 1, d = 0, rate 2 on [0, 1]; queue peaks at 1 when s = 1."""
    sc = single_bottleneck(demand=2, horizon=(-3, 3))
    return sc, {1: step(0, 1, 2)}


@pytest.fixture
def tree3_scenario():
    return three_link_tree()


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
