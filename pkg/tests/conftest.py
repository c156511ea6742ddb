import numpy as np
import pytest

from minar.process import ModelParams

C1 = np.array([
    [0.64, 0.5709447, 0.5344570],
    [0.5709447, 0.64, 0.5919781],
    [0.5344570, 0.5919781, 0.64],
])
C2 = np.array([
    [0.640, 0.320, -0.192],
    [0.320, 0.640, 0.192],
    [-0.192, 0.192, 0.640],
])
ALPHAS = {"A1": (0.1, 0.3, 0.5), "A2": (0.3, 0.3, 0.3), "A3": (0.5, 0.5, 0.5)}
MUS = {"B1": (0.5, 0.5, 0.5), "B2": (1.0, 1.0, 1.0)}
SIGMAS = {"C1": C1, "C2": C2}


def scenario(family, a="A2", b="B1", c="C1"):
    return ModelParams.from_arrays(family, ALPHAS[a], MUS[b], SIGMAS[c])


@pytest.fixture
def a2b1c1_pl():
    return scenario("pl")


@pytest.fixture
def a2b1c1_gl():
    return scenario("gl")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running replication studies")
