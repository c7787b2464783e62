"""
Services Package

This package contains the command services and the data harness.
"""

from .ablation_service import AblationService
from .bench_service import BenchService
from .eval_service import EvalService
from .infer_service import InferService
from .train_service import TrainService
from .verify_service import VerifyService

__all__ = ["AblationService", "BenchService", "EvalService", "InferService", "TrainService", "VerifyService"]
