"""
Full-Scale Configuration

This module contains the full training protocol: C0=48, AdamW at 2e-4
annealed to 1e-6 over 1.4M iterations.
"""

from .base import BaseConfig


class FullScaleConfig(BaseConfig):
    """Full-scale configuration"""

    LOG_LEVEL = "INFO"

    RUN_DEFAULTS = {
        "model.base_channels": 48,
        "optimizer.lr": 2e-4,
        "schedule.lr_min": 1e-6,
        "schedule.iterations": 1400000,
        "checkpoint_every": 10000,
        "log_every": 500,
    }
