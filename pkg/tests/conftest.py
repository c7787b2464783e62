"""
Shared fixtures.

Long acceptance runs are marked ``slow`` and only run with DABFORMER_RUN_SLOW=1.
"""

import os

import numpy as np
import pytest

from dabformer.config.loader import load_run_config
from dabformer.schemas.model_schema import ModelConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance test (set DABFORMER_RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("DABFORMER_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set DABFORMER_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    """Seeded generator, fresh for every test."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model_config():
    """Four-level model, one block per level, C0=4."""
    return ModelConfig(base_channels=4, blocks=[1, 1, 1, 1])


@pytest.fixture
def testing_run(tmp_path):
    """Run configuration from the testing profile, writing into tmp_path."""
    return load_run_config(profile="testing", overrides={"output_dir": str(tmp_path / "run")}, environ={})
