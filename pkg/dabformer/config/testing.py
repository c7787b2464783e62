"""
Testing Configuration

This module contains testing-specific configuration settings.
"""

from .base import BaseConfig


class TestingConfig(BaseConfig):
    """Testing configuration"""

    TESTING = True
    LOG_LEVEL = "ERROR"
    PROGRESS = False

    # Tiny network and corpus
    RUN_DEFAULTS = {
        "model.base_channels": 4,
        "model.blocks": [1, 1, 1, 1],
        "schedule.iterations": 4,
        "batch_size": 1,
        "dataset.n": 2,
        "dataset.size": 16,
        "val_dataset.n": 1,
        "val_dataset.size": 16,
        "log_every": 1,
        "checkpoint_every": 2,
        "prefetch": 0,
    }
