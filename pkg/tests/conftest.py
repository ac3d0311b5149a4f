import math

import numpy as np
import pytest

from aknslab.spectral import Grid
from aknslab.profiles import gaussian


@pytest.fixture(scope="session")
def grid():
    return Grid(64.0, 256)


@pytest.fixture(scope="session")
def small_gaussian(grid):
    return gaussian(grid, 0.1)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260809)


def l2(grid, values):
    return math.sqrt(grid.dx * float(np.sum(np.abs(values) ** 2)))


def rel_l2(grid, values, reference):
    return l2(grid, values - reference) / max(l2(grid, reference), 1e-300)
