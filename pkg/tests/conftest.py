import os

import numpy as np
import pytest

from mbo_epbii.core.config import EAConfig, LikelihoodGAConfig, OptimizerConfig


def pytest_collection_modifyitems(config, items):
    if os.environ.get("MBO_RUN_ACCEPTANCE") == "1":
        return
    skip = pytest.mark.skip(reason="set MBO_RUN_ACCEPTANCE=1 to run acceptance experiments")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fast_likelihood_ga():
    return LikelihoodGAConfig(population_size=8, generations=3)


@pytest.fixture
def tiny_optimizer_config(fast_likelihood_ga):
    """Two-objective settings small enough for unit tests."""
    return OptimizerConfig(
        n_init=8,
        n_max=14,
        n_add=3,
        n_ref=4,
        sld_h1=3,
        sld_h2=0,
        nsga3_h1=20,
        nsga3_h2=0,
        nsga3=EAConfig(generations=5),
        extreme_ga=EAConfig(population_size=8, generations=3),
        moead=EAConfig(generations=2),
        likelihood_ga=fast_likelihood_ga,
        mc_samples=20,
        seed=1,
    )
