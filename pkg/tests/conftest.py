import numpy as np
import pytest

from twostage_dr import instances
from twostage_dr.model import CostModel, LoadType, ScalarCost, validate_config


@pytest.fixture
def det_types():
    return [LoadType("a", 3, 1.0), LoadType("b", 3, 2.0)]


@pytest.fixture
def costs():
    return CostModel()


@pytest.fixture
def gen_costs():
    return CostModel(generator=ScalarCost("quadratic", a=1.0))


@pytest.fixture
def det_cfg():
    return validate_config(instances.deterministic())


@pytest.fixture
def game_cfg():
    return validate_config(instances.net_demand_game(days=2000))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
