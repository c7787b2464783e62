"""
Model Schemas

This module contains the validated model configuration.
"""

import hashlib
import json
from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dabformer.core.gabor import parse_direction_strategy, parse_lambda_mode
from dabformer.utils.constants import EXPANSION_RATIO, PAD_MULTIPLE, PATCH_SIZE
from dabformer.utils.exceptions import ConfigError

Q_PATHS = ("plain", "dwt", "gabor", "fused")
FFN_KINDS = ("ffn", "fdagn")


class ModelConfig(BaseModel):
    """Architecture of one Dabformer; everything that determines parameter layout"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    base_channels: int = Field(8, ge=1)
    in_channels: int = Field(3, ge=1)
    blocks: List[int] = Field(default_factory=lambda: [4, 6, 6, 8])
    heads: List[int] = Field(default_factory=lambda: [1, 2, 4, 8])
    expansion: float = Field(EXPANSION_RATIO, gt=0)
    patch_size: int = Field(PATCH_SIZE, ge=1)
    pad_multiple: int = Field(PAD_MULTIPLE, ge=1)
    q_path: str = "fused"
    ffn: str = "fdagn"
    gabor_dirs: str = "matched"
    gabor_lambda: str = "adaptive"

    @field_validator("q_path")
    @classmethod
    def _check_q_path(cls, value: str) -> str:
        if value not in Q_PATHS:
            raise ValueError(f"q_path must be one of {', '.join(Q_PATHS)}")
        return value

    @field_validator("ffn")
    @classmethod
    def _check_ffn(cls, value: str) -> str:
        if value not in FFN_KINDS:
            raise ValueError(f"ffn must be one of {', '.join(FFN_KINDS)}")
        return value

    @field_validator("gabor_dirs")
    @classmethod
    def _check_dirs(cls, value: str) -> str:
        try:
            parse_direction_strategy(value)
        except ConfigError as e:
            raise ValueError(e.message) from e
        return value

    @field_validator("gabor_lambda")
    @classmethod
    def _check_lambda(cls, value: str) -> str:
        try:
            parse_lambda_mode(value)
        except ConfigError as e:
            raise ValueError(e.message) from e
        return value

    @model_validator(mode="after")
    def _check_levels(self) -> "ModelConfig":
        if not self.blocks or len(self.blocks) != len(self.heads):
            raise ValueError(f"blocks ({len(self.blocks)}) and heads ({len(self.heads)}) need one entry per level")
        if any(b < 1 for b in self.blocks) or any(h < 1 for h in self.heads):
            raise ValueError("blocks and heads must be positive")
        for level, heads in enumerate(self.heads):
            width = self.level_channels(level)
            if width % heads:
                raise ValueError(f"level {level} width {width} not divisible by {heads} heads")
        if self.pad_multiple % (2**self.levels):
            raise ValueError(f"pad_multiple {self.pad_multiple} must be divisible by 2^levels")
        return self

    @property
    def levels(self) -> int:
        return len(self.blocks)

    def level_channels(self, level: int) -> int:
        return self.base_channels * 2**level

    def config_hash(self) -> bytes:
        """SHA-256 of the canonical JSON form"""
        canonical = json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).digest()
