"""
Utils Package

This package contains exceptions, constants, decorators and helpers.
"""

from .constants import *  # noqa: F401,F403
from .decorators import log_command
from .exceptions import (
    CheckpointError,
    ConfigError,
    CoverageError,
    DabformerError,
    GradCheckError,
    ImageFormatError,
    NonFiniteError,
    ShapeError,
)
from .helpers import CsvLog, ensure_dir, format_timestamp, write_csv

__all__ = [
    "log_command",
    "CsvLog",
    "ensure_dir",
    "format_timestamp",
    "write_csv",
    "DabformerError",
    "ShapeError",
    "NonFiniteError",
    "ConfigError",
    "CheckpointError",
    "ImageFormatError",
    "CoverageError",
    "GradCheckError",
]
