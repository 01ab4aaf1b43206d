import numpy as np
import pytest

from src.core.types import FeedbackArm


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance batteries that take minutes")


# Fixture for a fast-mixing two-arm instance
@pytest.fixture
def two_arms():
    return (FeedbackArm(0.2, 0.3, 1.0), FeedbackArm(0.15, 0.25, 2.0))


# Fixture for the two stochastic arms of the index-gap instance
@pytest.fixture
def gap_arm():
    return FeedbackArm(0.1, 0.1, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
