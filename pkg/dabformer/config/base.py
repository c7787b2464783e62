"""
Base Configuration

This module contains the base configuration class with common settings
shared across all profiles.
"""

import os

from dotenv import load_dotenv

load_dotenv()


class BaseConfig:
    """Base configuration class"""

    # Profile
    ENV = os.environ.get("DABFORMER_ENV", "desk")
    TESTING = False

    # Logging
    LOG_LEVEL = os.environ.get("DABFORMER_LOG_LEVEL", "INFO")
    PROGRESS = True

    # Outputs
    OUTPUT_DIR = os.environ.get("DABFORMER_OUTPUT_DIR", "runs")

    # Flat run-config defaults (dotted keys, same grammar as config files)
    RUN_DEFAULTS = {}

    @classmethod
    def run_defaults(cls) -> dict:
        defaults = {"output_dir": cls.OUTPUT_DIR}
        defaults.update(cls.RUN_DEFAULTS)
        return defaults
