"""
Run Schemas

This module contains the validated training, data and run configuration.
"""

from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dabformer.schemas.model_schema import ModelConfig
from dabformer.utils.constants import (
    DEFAULT_LOSS_WEIGHTS,
    LOSS_TERMS,
    MAX_COVERAGE,
    RAIN_ANGLE_JITTER_DEG,
    RAIN_INTENSITY,
)

GENERATORS = ("gradients", "checkerboards", "filtered_noise", "mixed")
CORRUPTIONS = ("noise_blocks", "rain_streaks")


class LossWeights(BaseModel):
    """Weights of the four objective terms"""

    model_config = ConfigDict(extra="forbid")

    l1: float = Field(DEFAULT_LOSS_WEIGHTS["l1"], ge=0)
    perceptual: float = Field(DEFAULT_LOSS_WEIGHTS["perceptual"], ge=0)
    edge: float = Field(DEFAULT_LOSS_WEIGHTS["edge"], ge=0)
    ssim: float = Field(DEFAULT_LOSS_WEIGHTS["ssim"], ge=0)


class OptimizerConfig(BaseModel):
    """AdamW hyperparameters"""

    model_config = ConfigDict(extra="forbid")

    lr: float = Field(2e-4, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    weight_decay: float = Field(1e-4, ge=0)
    clip_norm: float = Field(1.0, gt=0)


class ScheduleConfig(BaseModel):
    """Cosine annealing from the optimiser lr down to ``lr_min`` over ``iterations``"""

    model_config = ConfigDict(extra="forbid")

    lr_min: float = Field(1e-6, gt=0)
    iterations: int = Field(20000, ge=1)


class CorruptionSpec(BaseModel):
    """Synthetic degradation applied to clean images"""

    model_config = ConfigDict(extra="forbid")

    kind: str = "noise_blocks"
    coverage: Tuple[float, float] = (0.4, 0.5)
    block_size: Tuple[int, int] = (4, 16)
    rain_angle_deg: float = 75.0
    rain_angle_jitter_deg: float = RAIN_ANGLE_JITTER_DEG
    rain_length: Tuple[int, int] = (6, 20)
    rain_density: float = Field(0.02, ge=0)
    rain_intensity: Tuple[float, float] = RAIN_INTENSITY
    seed: int = 0

    @field_validator("kind")
    @classmethod
    def _check_kind(cls, value: str) -> str:
        if value not in CORRUPTIONS:
            raise ValueError(f"kind must be one of {', '.join(CORRUPTIONS)}")
        return value

    @field_validator("coverage")
    @classmethod
    def _check_coverage(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not 0.0 <= low <= high <= MAX_COVERAGE:
            raise ValueError(f"coverage must satisfy 0 <= low <= high <= {MAX_COVERAGE}, got {value}")
        return value

    @field_validator("block_size", "rain_length")
    @classmethod
    def _check_size_range(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        if not 1 <= value[0] <= value[1]:
            raise ValueError(f"size range must satisfy 1 <= min <= max, got {value}")
        return value

    @field_validator("rain_intensity")
    @classmethod
    def _check_intensity(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not 0.0 <= value[0] <= value[1] <= 1.0:
            raise ValueError(f"rain intensity must lie in [0, 1], got {value}")
        return value


class DatasetSpec(BaseModel):
    """Synthetic corpus or a manifest of image pairs"""

    model_config = ConfigDict(extra="forbid")

    generator: str = "mixed"
    n: int = Field(4, ge=1)
    size: int = Field(64, ge=16)
    seed: int = 0
    manifest: Optional[str] = None

    @field_validator("generator")
    @classmethod
    def _check_generator(cls, value: str) -> str:
        if value not in GENERATORS:
            raise ValueError(f"generator must be one of {', '.join(GENERATORS)}")
        return value


class RunConfig(BaseModel):
    """Everything one command run needs"""

    model_config = ConfigDict(extra="forbid")

    model: ModelConfig = Field(default_factory=ModelConfig)
    loss_weights: LossWeights = Field(default_factory=LossWeights)
    loss_terms: List[str] = Field(default_factory=lambda: list(LOSS_TERMS))
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    val_dataset: DatasetSpec = Field(default_factory=lambda: DatasetSpec(seed=1))
    corruption: CorruptionSpec = Field(default_factory=CorruptionSpec)
    batch_size: int = Field(2, ge=1)
    seed: int = 0
    output_dir: str = "runs"
    log_every: int = Field(50, ge=1)
    checkpoint_every: int = Field(1000, ge=1)
    eval_bands: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(0.2, 0.3), (0.3, 0.4), (0.4, 0.5), (0.5, 0.6), (0.6, 0.7)]
    )
    prefetch: int = Field(2, ge=0)
    perceptual_weights: Optional[str] = None

    @field_validator("loss_terms")
    @classmethod
    def _check_terms(cls, value: List[str]) -> List[str]:
        unknown = [t for t in value if t not in LOSS_TERMS]
        if unknown or not value:
            raise ValueError(f"loss terms must be a non-empty subset of {', '.join(LOSS_TERMS)}")
        return [t for t in LOSS_TERMS if t in value]

    @field_validator("eval_bands")
    @classmethod
    def _check_bands(cls, value: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        for low, high in value:
            if not 0.0 <= low <= high <= MAX_COVERAGE:
                raise ValueError(f"occlusion band ({low}, {high}) outside [0, {MAX_COVERAGE}]")
        return value

    @model_validator(mode="after")
    def _check_schedule(self) -> "RunConfig":
        if self.optimizer.lr < self.schedule.lr_min:
            raise ValueError(f"lr {self.optimizer.lr} must be >= lr_min {self.schedule.lr_min}")
        return self

    def config_hash(self) -> bytes:
        return self.model.config_hash()
