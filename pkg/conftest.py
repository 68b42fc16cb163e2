"""Shared pytest fixtures."""

import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from fixtures import get_fixture  # noqa: E402

# Fixtures here never carry state between examples.
settings.register_profile("gengrad", suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("gengrad")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def affine():
    return get_fixture("affine-1-1")


@pytest.fixture
def pinned_small():
    return get_fixture("pinned-relu-1-2-1")


@pytest.fixture
def pinned():
    return get_fixture("pinned-relu-2-3-2")


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    """Tests opt into parallelism explicitly."""
    monkeypatch.delenv("GENGRAD_THREADS", raising=False)
