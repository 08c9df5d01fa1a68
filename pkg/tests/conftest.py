# -*- coding: utf-8 -*-

import logging
import os

import numpy as np
import pytest

from eertrack.dmmn.model import DmmnParams
from eertrack.geometry import OcclusionZone, Rect, Workspace
from eertrack.harness import SimConfig
from eertrack.road import RoadNetwork


CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config')


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run slow acceptance tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long running acceptance reproduction')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _detach_log_handlers():
    yield
    logger = logging.getLogger('eertrack')
    for handler in list(logger.handlers):
        logger.removeHandler(handler)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def workspace():
    return Workspace((0.0, 0.0, 11.0, 5.5), [OcclusionZone(Rect(5.0, 0.5, 6.0, 1.5), 'node_a')])


@pytest.fixture
def line_network():
    return RoadNetwork({'A': (0.0, 0.0), 'B': (1.0, 0.0)}, {'A': {'B': 1.0}, 'B': {'A': 1.0}}, 0.5, 'A')


@pytest.fixture
def zero_params():
    return DmmnParams.initialize(np.random.default_rng(0), d_model=8, heads=2, layers=1, d_ff=16, k_in=4)


@pytest.fixture
def default_config_path():
    return os.path.join(CONFIG_DIR, 'default.yml')


@pytest.fixture
def short_config():
    """Small, fast episode on the default network with the constant-velocity model."""
    return SimConfig.from_dict({
        'duration': 6.0,
        'motion_model': 'cv',
        'model_weights': None,
        'filter': {'n': 100},
        'eer': {'n_h': 10},
    })
