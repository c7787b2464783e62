"""
Schemas Package

This package contains the validated configuration models.
"""

from .model_schema import FFN_KINDS, Q_PATHS, ModelConfig
from .run_schema import (
    CORRUPTIONS,
    GENERATORS,
    CorruptionSpec,
    DatasetSpec,
    LossWeights,
    OptimizerConfig,
    RunConfig,
    ScheduleConfig,
)

__all__ = [
    "ModelConfig",
    "LossWeights",
    "OptimizerConfig",
    "ScheduleConfig",
    "DatasetSpec",
    "CorruptionSpec",
    "RunConfig",
    "Q_PATHS",
    "FFN_KINDS",
    "GENERATORS",
    "CORRUPTIONS",
]
