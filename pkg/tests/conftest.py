

import pytest

import sys
import os


sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.services.sufficient_stats import summarize, summarize_frequencies


PRUSSIAN_FREQ = {0: 144, 1: 91, 2: 32, 3: 11, 4: 2}
DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long Monte Carlo acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def prussian():
    """Horse-kick deaths per corps-year: mean 0.7, S^2 about 0.7627."""
    return summarize_frequencies(PRUSSIAN_FREQ)


@pytest.fixture
def prussian_path():
    """Path of the shipped value,count fixture."""
    return os.path.join(DATA_DIR, "prussian.csv")


@pytest.fixture
def all_zero():
    """Ten zeros."""
    return summarize([0] * 10)


@pytest.fixture
def constant_twos():
    """The sample [2, 2, 2]."""
    return summarize([2, 2, 2])


@pytest.fixture
def underdispersed():
    """Mean 5, S^2 well below the mean, several distinct values."""
    return summarize([4, 5, 6, 5, 4, 6, 5, 5, 4, 6])
