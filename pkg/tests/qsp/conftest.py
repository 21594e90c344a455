"""Shared fixtures for the qsp test suite."""

from __future__ import annotations

import numpy as np
import pytest

from qsp.grid import Sampling, TimeGrid

# Coarser than the library defaults so construction stays fast in tests.
FAST_SAMPLING = Sampling(t_max=5.0, samples=256, pair_points=24)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def grid() -> TimeGrid:
    """12 uniform points on [0, 5]: 220 triples."""
    return TimeGrid.uniform(5.0, 12)


@pytest.fixture
def fast_sampling() -> Sampling:
    return FAST_SAMPLING
