import math

import numpy as np
import pytest

from dualirs.channel import PropagationParams
from dualirs.cli import load_scenario
from dualirs.geometry import PanelGeometry

HALF_SQRT3 = math.sqrt(3) / 2
BS = (0.87, 0.5, 0.0)
USER = (13.0, 92.5, 0.0)


def irs1_panel(count_a=1, count_b=1, spacing=0.03):
    return PanelGeometry((0, 0, 0), (0, 0, 1), (HALF_SQRT3, -0.5, 0), count_a, count_b, spacing)


def irs2_panel(count_a=1, count_b=1, spacing=0.03):
    return PanelGeometry((0, 100, 0), (HALF_SQRT3, 0.5, 0), (0, 0, 1), count_a, count_b, spacing)


@pytest.fixture
def prop():
    return PropagationParams(0.06)


@pytest.fixture(scope="session")
def scenario():
    return load_scenario("reference")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_units(rng, *shape):
    return np.exp(1j * rng.uniform(-np.pi, np.pi, shape))


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
