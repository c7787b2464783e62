"""
Configuration Package

This package contains configuration profiles (desk, full-scale, testing) and
the run-config loader.
"""

from .base import BaseConfig
from .desk import DeskConfig
from .full_scale import FullScaleConfig
from .testing import TestingConfig

# Configuration dictionary
config = {
    "desk": DeskConfig,
    "full": FullScaleConfig,
    "testing": TestingConfig,
    "default": DeskConfig,
}

__all__ = ["config", "BaseConfig", "DeskConfig", "FullScaleConfig", "TestingConfig"]
