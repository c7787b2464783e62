"""
Dabformer Model

Shallow 3x3 embedding, a symmetric encoder/decoder of transformer blocks with
pixel-(un)shuffle resampling and concatenated skips, and a 3x3 reconstruction
added back onto the input image.
"""

import logging
from typing import List, Set, Tuple

import numpy as np

from dabformer.core import ops
from dabformer.core.block import DabformerBlock
from dabformer.core.fdagn import FdagnConfig, FreqFilter
from dabformer.core.fdfa import FdfaConfig
from dabformer.core.module import Conv2d, Module, ModuleList
from dabformer.core.tensor import Tensor
from dabformer.schemas.model_schema import ModelConfig
from dabformer.utils.constants import MESSAGES, MIN_INPUT_SIZE, REFERENCE_PARAMS
from dabformer.utils.exceptions import ShapeError

logger = logging.getLogger(__name__)


class Downsample(Module):
    """pixel_unshuffle(2) then 1x1 conv 4C -> 2C"""

    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.reduce = Conv2d(4 * channels, 2 * channels, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.reduce(ops.pixel_unshuffle(x, 2))


class Upsample(Module):
    """1x1 conv 2C -> 4C then pixel_shuffle(2), giving C channels at twice the extent"""

    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.expand = Conv2d(channels, 2 * channels, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        return ops.pixel_shuffle(self.expand(x), 2)


def build_level(config: ModelConfig, level: int, rng: np.random.Generator) -> ModuleList:
    channels = config.level_channels(level)
    attention = FdfaConfig(
        channels=channels,
        heads=config.heads[level],
        q_path=config.q_path,
        gabor_dirs=config.gabor_dirs,
        gabor_lambda=config.gabor_lambda,
    )
    feed_forward = FdagnConfig(
        channels=channels,
        expansion=config.expansion,
        patch_size=config.patch_size,
        frequency=config.ffn == "fdagn",
        pad_to_patch=True,
    )
    return ModuleList([DabformerBlock(attention, feed_forward, rng) for _ in range(config.blocks[level])])


def run_blocks(blocks: ModuleList, x: Tensor) -> Tensor:
    for block in blocks:
        x = block(x)
    return x


class Dabformer(Module):
    """
    Full restoration network.

    Args:
        config: Architecture
        seed: Initialisation seed; identical seeds give bitwise-identical weights
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        super().__init__()
        self.config = config
        rng = np.random.default_rng(seed)
        levels = config.levels
        c0 = config.base_channels

        self.embed = Conv2d(config.in_channels, c0, 3, rng)
        self.encoders = ModuleList([build_level(config, level, rng) for level in range(levels)])
        self.downs = ModuleList([Downsample(config.level_channels(level), rng) for level in range(levels - 1)])
        self.ups = ModuleList([Upsample(config.level_channels(level + 1), rng) for level in range(levels - 1)])
        self.fuses = ModuleList(
            [Conv2d(2 * config.level_channels(level), config.level_channels(level), 1, rng) for level in range(levels - 1)]
        )
        self.decoders = ModuleList([build_level(config, level, rng) for level in range(levels - 1)])
        self.reconstruct = Conv2d(c0, config.in_channels, 3, rng)
        self.level_shapes: List[Tuple[int, ...]] = []
        self._padding_logged: Set[Tuple[int, int]] = set()
        self.assign_paths()
        logger.debug(f"Dabformer built: {self.num_parameters()} parameters, {levels} levels, C0={c0}")

    def pad_amounts(self, height: int, width: int) -> Tuple[int, int]:
        m = self.config.pad_multiple
        return (-height) % m, (-width) % m

    def patch_padding(self, height: int, width: int) -> List[Tuple[int, Tuple[int, int]]]:
        """Levels whose extent the frequency stage zero-pads up to a multiple of the patch size"""
        if self.config.ffn != "fdagn":
            return []
        p = self.config.patch_size
        pad_h, pad_w = self.pad_amounts(height, width)
        rows = []
        for level in range(self.config.levels):
            extent = ((height + pad_h) >> level, (width + pad_w) >> level)
            if extent[0] % p or extent[1] % p:
                rows.append((level, extent))
        return rows

    def _log_patch_padding(self, height: int, width: int) -> None:
        key = (height, width)
        if key in self._padding_logged:
            return
        self._padding_logged.add(key)
        rows = self.patch_padding(height, width)
        if rows:
            levels = ", ".join(f"L{level} {h}x{w}" for level, (h, w) in rows)
            logger.info(f"Frequency stage zero-pads to P={self.config.patch_size} at {levels}")

    def check_input(self, x: Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise ShapeError(f"model expects [B, {self.config.in_channels}, H, W]", details=f"got {x.shape}")
        height, width = x.shape[-2:]
        if height < MIN_INPUT_SIZE or width < MIN_INPUT_SIZE:
            raise ShapeError(MESSAGES["IMAGE_TOO_SMALL"], details=f"H={height} W={width}")

    def forward(self, image: Tensor) -> Tensor:
        self.check_input(image)
        height, width = image.shape[-2:]
        pad_h, pad_w = self.pad_amounts(height, width)
        self._log_patch_padding(height, width)
        x = self.embed(ops.pad2d(image, pad_h, pad_w, mode="reflect"))
        padded = (height + pad_h, width + pad_w)

        skips = []
        self.level_shapes = []
        last = self.config.levels - 1
        for level, blocks in enumerate(self.encoders):
            x = run_blocks(blocks, x)
            expected = (self.config.level_channels(level), padded[0] >> level, padded[1] >> level)
            if x.shape[1:] != expected:
                raise ShapeError(f"encoder level {level} produced {x.shape[1:]}, expected {expected}")
            self.level_shapes.append(x.shape)
            if level < last:
                skips.append(x)
                x = self.downs[level](x)

        for level in reversed(range(last)):
            x = self.ups[level](x)
            x = self.fuses[level](ops.concat([x, skips[level]], axis=1))
            x = run_blocks(self.decoders[level], x)

        residual = self.reconstruct(x)[..., :height, :width]
        return residual + image

    # ---------------------------------------------------------------- reports
    def frequency_filter_params(self) -> int:
        return sum(m.real.size + m.imag.size for _, m in self.named_modules() if isinstance(m, FreqFilter))

    def summary(self) -> List[Tuple[str, int]]:
        """Per-module parameter counts, top-level children first"""
        rows = []
        for name, module in self._modules.items():
            rows.append((name, module.num_parameters()))
        rows.append(("frequency filters", self.frequency_filter_params()))
        rows.append(("total", self.num_parameters()))
        return rows

    def summary_table(self) -> str:
        width = max(len(name) for name, _ in self.summary())
        lines = [f"{name:<{width}}  {count:>12,d}" for name, count in self.summary()]
        total = self.num_parameters()
        lines.append(f"{'reference':<{width}}  {int(REFERENCE_PARAMS):>12,d}  (ratio {total / REFERENCE_PARAMS:.3f})")
        return "\n".join(lines)
