"""
Desk Configuration

This module contains the laptop-scale defaults: C0=8, 64x64 crops, batch 2,
2e4 iterations.
"""

from .base import BaseConfig


class DeskConfig(BaseConfig):
    """Desk-scale configuration"""

    RUN_DEFAULTS = {
        "model.base_channels": 8,
        "schedule.iterations": 20000,
        "batch_size": 2,
        "dataset.size": 64,
    }
