"""
Frequency-Domain Adaptive Gating Network

Feed-forward stage: 1x1 expansion, patchwise FFT filtered by a learnable
complex weight per (channel, bin), inverse FFT, depthwise-separable 3x3
convolution, GELU gate and 1x1 projection back to the block width.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from dabformer.core import ops
from dabformer.core.module import Conv2d, DepthwiseSeparableConv2d, Module, Parameter
from dabformer.core.spectral import ComplexMap, complex_pointwise_filter, irfft2, rfft2
from dabformer.core.tensor import Tensor
from dabformer.utils.constants import EXPANSION_RATIO, PATCH_SIZE
from dabformer.utils.exceptions import ShapeError

logger = logging.getLogger(__name__)


def round_to_even(value: float) -> int:
    """Nearest even integer, halves rounded up"""
    return int(math.floor(value / 2.0 + 0.5)) * 2


@dataclass
class FdagnConfig:
    channels: int
    expansion: float = EXPANSION_RATIO
    patch_size: int = PATCH_SIZE
    frequency: bool = True
    pad_to_patch: bool = False

    def validate(self) -> None:
        if self.channels < 1:
            raise ShapeError(f"channels must be positive, got {self.channels}")
        if self.patch_size < 1:
            raise ShapeError(f"patch_size must be positive, got {self.patch_size}")
        if self.hidden < 2:
            raise ShapeError(f"hidden width {self.hidden} too small for the gate split")

    @property
    def hidden(self) -> int:
        return max(2, round_to_even(self.channels * self.expansion))


class FreqFilter(Module):
    """Complex weights [Ch, P, P/2 + 1], initialised to 1 + 0i"""

    def __init__(self, channels: int, patch_size: int):
        super().__init__()
        shape = (channels, patch_size, patch_size // 2 + 1)
        self.real = Parameter(np.ones(shape))
        self.imag = Parameter(np.zeros(shape))

    @staticmethod
    def count(channels: int, patch_size: int) -> int:
        return 2 * channels * patch_size * (patch_size // 2 + 1)

    def as_map(self) -> ComplexMap:
        c, p, q = self.real.shape
        return ComplexMap(self.real.reshape(c, 1, 1, p, q), self.imag.reshape(c, 1, 1, p, q))


def patchify(x: Tensor, p: int) -> Tensor:
    """[B, C, H, W] -> [B, C, H/p, W/p, p, p]"""
    batch, channels, height, width = x.shape
    if height % p or width % p:
        raise ShapeError(f"extent {height}x{width} not divisible by patch size P={p}")
    y = x.reshape(batch, channels, height // p, p, width // p, p)
    return y.permute(0, 1, 2, 4, 3, 5)


def unpatchify(x: Tensor) -> Tensor:
    """Inverse of ``patchify``"""
    batch, channels, nh, nw, p, q = x.shape
    return x.permute(0, 1, 2, 4, 3, 5).reshape(batch, channels, nh * p, nw * q)


class FDAGN(Module):
    """
    Frequency-domain adaptive gating network.

    With ``frequency=False`` the frequency stage is bypassed and the module is
    a plain gated depthwise feed-forward network.
    """

    def __init__(self, config: FdagnConfig, rng: np.random.Generator):
        super().__init__()
        config.validate()
        self.config = config
        hidden = config.hidden
        self.expand = Conv2d(config.channels, hidden, 1, rng)
        self.freq_filter = FreqFilter(hidden, config.patch_size) if config.frequency else None
        self.dsconv = DepthwiseSeparableConv2d(hidden, hidden, rng)
        self.project = Conv2d(hidden // 2, config.channels, 1, rng)

    def frequency_stage(self, h: Tensor) -> Tensor:
        """Patch, FFT, filter, inverse FFT, reassemble; shape preserved"""
        if self.freq_filter is None:
            return h
        p = self.config.patch_size
        height, width = h.shape[-2:]
        pad_h, pad_w = (-height) % p, (-width) % p
        if pad_h or pad_w:
            if not self.config.pad_to_patch:
                raise ShapeError(f"extent {height}x{width} not divisible by patch size P={p}")
            h = ops.pad2d(h, pad_h, pad_w, mode="zero")
        patches = patchify(h, p)
        filtered = complex_pointwise_filter(rfft2(patches), self.freq_filter.as_map())
        out = unpatchify(irfft2(filtered, p, p))
        if pad_h or pad_w:
            out = out[..., :height, :width]
        return out

    def gate(self, h: Tensor) -> Tensor:
        path1, path2 = ops.split(h, 2, axis=1)
        return ops.gelu(path1) * path2

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.config.channels:
            raise ShapeError(f"FDAGN expects [B, {self.config.channels}, H, W]", details=f"got {x.shape}")
        h = self.frequency_stage(self.expand(x))
        return self.project(self.gate(self.dsconv(h)))
