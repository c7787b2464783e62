"""
Frequency-Domain Fusion Attention

The query is built from a wavelet/Gabor fusion of the input; keys and values
come from pointwise plus depthwise convolutions of the un-fused input. Attention
is taken over the channel axis, so each head forms a [C/h, C/h] map and the cost
grows with C^2 rather than with the number of pixels squared.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from dabformer.core import ops
from dabformer.core.gabor import DETAIL_BANDS, GaborBank, parse_direction_strategy, parse_lambda_mode
from dabformer.core.module import Conv2d, DepthwiseSeparableConv2d, Module, Parameter
from dabformer.core.spectral import Subbands, dwt2, idwt2
from dabformer.core.tensor import Tensor
from dabformer.utils.constants import GABOR_KSIZE
from dabformer.utils.exceptions import ShapeError

logger = logging.getLogger(__name__)


@dataclass
class FdfaConfig:
    channels: int
    heads: int = 1
    q_path: str = "fused"
    gabor_dirs: str = "matched"
    gabor_lambda: str = "adaptive"
    ksize_gabor: int = GABOR_KSIZE
    ksize_dw: int = 3
    temperature_init: Optional[float] = None

    def validate(self) -> None:
        if self.channels < 1 or self.heads < 1:
            raise ShapeError(f"channels and heads must be positive, got C={self.channels} h={self.heads}")
        if self.channels % self.heads:
            raise ShapeError(f"channels C={self.channels} not divisible by heads h={self.heads}")
        if self.q_path not in ("plain", "dwt", "gabor", "fused"):
            raise ShapeError(f"unknown query path {self.q_path!r}")

    @property
    def head_dim(self) -> int:
        return self.channels // self.heads


def query_param_count(q_path: str, channels: int, adaptive: bool = True, conv_bands: bool = False) -> int:
    """
    Learnables of the query path, including its 1x1 projection.

    ``conv_bands`` counts the learnable 3x3 depthwise band kernels that
    replace Gabor kernels under the ``conv`` orientation strategy.
    """
    c = channels
    plain = c * c + c
    ll_path = (9 * c + c) + (c * c + c)
    if conv_bands:
        bank = len(DETAIL_BANDS) * (9 * c + c)
    else:
        bank = len(DETAIL_BANDS) if adaptive else 0
    return {
        "plain": plain,
        "dwt": plain + ll_path,
        "gabor": plain + bank,
        "fused": plain + ll_path + bank,
    }[q_path]


def attention_flops(channels: int, pixels: int, heads: int) -> int:
    """Multiplications in Q K^T and A V: 2 * h * (C/h)^2 * M"""
    if channels < 1 or pixels < 1 or heads < 1:
        raise ShapeError(f"attention_flops needs positive arguments, got C={channels} M={pixels} h={heads}")
    if channels % heads:
        raise ShapeError(f"channels C={channels} not divisible by heads h={heads}")
    d = channels // heads
    return 2 * heads * d * d * pixels


class FrequencyDomainFusion(Module):
    """
    DWT, per-band enhancement, inverse DWT.

    Detail bands go through their oriented Gabor kernels (or pass unchanged
    when ``bank`` is None); LL goes through a depthwise-separable convolution.
    """

    def __init__(self, channels: int, rng: np.random.Generator, bank: Optional[GaborBank], ksize_dw: int = 3):
        super().__init__()
        self.ll_path = DepthwiseSeparableConv2d(channels, channels, rng, kernel_size=ksize_dw)
        self.bank = bank

    def enhance(self, s: Subbands) -> Subbands:
        if self.bank is None:
            return Subbands(self.ll_path(s.ll), s.hl, s.lh, s.hh)
        return Subbands(
            ll=self.ll_path(s.ll),
            hl=self.bank("hl", s.hl),
            lh=self.bank("lh", s.lh),
            hh=self.bank("hh", s.hh),
        )

    def forward(self, x: Tensor) -> Tensor:
        height, width = x.shape[-2:]
        if height % 2 or width % 2:
            raise ShapeError(f"frequency fusion needs even extents, got H={height} W={width}")
        return idwt2(self.enhance(dwt2(x)))


class OrientedGabor(Module):
    """Mean of the three oriented Gabor responses of the input, without a DWT"""

    def __init__(self, bank: GaborBank):
        super().__init__()
        self.bank = bank

    def forward(self, x: Tensor) -> Tensor:
        total = None
        for band in DETAIL_BANDS:
            response = self.bank(band, x)
            total = response if total is None else total + response
        return total * (1.0 / len(DETAIL_BANDS))


class FDFA(Module):
    """Channel-transposed multi-head attention with a frequency-fused query"""

    def __init__(self, config: FdfaConfig, rng: np.random.Generator):
        super().__init__()
        config.validate()
        self.config = config
        c = config.channels
        self.query_path = self._build_query_path(config, rng)
        self.q_proj = Conv2d(c, c, 1, rng)
        self.k_proj = Conv2d(c, c, 1, rng)
        self.k_dw = Conv2d(c, c, 3, rng, groups=c)
        self.v_proj = Conv2d(c, c, 1, rng)
        self.v_dw = Conv2d(c, c, 3, rng, groups=c)
        self.out_proj = Conv2d(c, c, 1, rng)
        init = config.temperature_init if config.temperature_init is not None else math.sqrt(config.head_dim)
        self.temperature = Parameter(np.full((config.heads, 1, 1), init))
        self.last_attention: Optional[np.ndarray] = None

    @staticmethod
    def _build_query_path(config: FdfaConfig, rng: np.random.Generator) -> Optional[Module]:
        if config.q_path == "plain":
            return None
        if config.q_path == "dwt":
            return FrequencyDomainFusion(config.channels, rng, None, config.ksize_dw)
        orientations = parse_direction_strategy(config.gabor_dirs, rng)
        adaptive, wavelength = parse_lambda_mode(config.gabor_lambda)
        bank = GaborBank(
            config.channels, DETAIL_BANDS, orientations, rng, adaptive, wavelength, ksize=config.ksize_gabor
        )
        if config.q_path == "gabor":
            return OrientedGabor(bank)
        return FrequencyDomainFusion(config.channels, rng, bank, config.ksize_dw)

    def query(self, x: Tensor) -> Tensor:
        fused = x if self.query_path is None else self.query_path(x)
        return self.q_proj(fused)

    def split_heads(self, t: Tensor) -> Tensor:
        batch, channels, height, width = t.shape
        return t.reshape(batch, self.config.heads, self.config.head_dim, height * width)

    def attend(self, x: Tensor) -> Tensor:
        """Attention branch before the output projection"""
        batch, channels, height, width = x.shape
        q = self.split_heads(self.query(x))
        k = self.split_heads(self.k_dw(self.k_proj(x)))
        v = self.split_heads(self.v_dw(self.v_proj(x)))
        attn = ops.softmax((q @ k.transpose(-2, -1)) / self.temperature, axis=-1)
        self.last_attention = attn.data
        return (attn @ v).reshape(batch, channels, height, width)

    def forward(self, x: Tensor, residual: bool = True) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.config.channels:
            raise ShapeError(f"FDFA expects [B, {self.config.channels}, H, W]", details=f"got {x.shape}")
        out = self.out_proj(self.attend(x))
        return x + out if residual else out
