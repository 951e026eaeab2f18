"""
Shared pytest fixtures for the angle coder laboratory
"""

import math

import numpy as np
import pytest

from angle_core import LE90, angle_grid


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: million-trial Monte Carlo acceptance runs")


@pytest.fixture(scope="session")
def fine_grid() -> np.ndarray:
    """18,000 angles covering [-pi/2, pi/2) at 0.01 degree"""
    return angle_grid(LE90, math.radians(0.01))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)
