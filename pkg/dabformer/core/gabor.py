"""
Gabor Filters

Kernel synthesis G(x, y) = exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2)) * cos(2 pi x' / lambda + psi)
with x' = x cos(theta) + y sin(theta), y' = -x sin(theta) + y cos(theta), and the
per-subband filter banks applied depthwise to wavelet detail bands.

Coordinates: x runs along columns (rightwards), y along rows (downwards),
both over [-(k-1)/2, (k-1)/2].
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from dabformer.core import ops
from dabformer.core.module import Buffer, Conv2d, Module, ModuleList, Parameter
from dabformer.core.tensor import Tensor
from dabformer.utils.constants import (
    FUSED_DIRECTIONS_DEG,
    GABOR_GAMMA,
    GABOR_KSIZE,
    GABOR_PSI,
    GABOR_SIGMA,
    LAMBDA_INIT,
    LAMBDA_MAX,
    LAMBDA_MIN,
)
from dabformer.utils.exceptions import ConfigError, ShapeError

logger = logging.getLogger(__name__)

DETAIL_BANDS = ("hl", "lh", "hh")

MATCHED_ORIENTATION_DEG = {"hl": 0.0, "lh": 90.0, "hh": 45.0}
MISALIGNED_ORIENTATION_DEG = {"hl": 90.0, "lh": 0.0, "hh": 45.0}


@dataclass
class GaborSpec:
    """Parameters of one Gabor kernel; ``wavelength`` may be a learnable scalar tensor"""

    wavelength: Union[float, Tensor] = LAMBDA_INIT
    theta: float = 0.0
    psi: float = GABOR_PSI
    sigma: float = GABOR_SIGMA
    gamma: float = GABOR_GAMMA
    ksize: int = GABOR_KSIZE

    def validate(self) -> None:
        if self.ksize < 3 or self.ksize % 2 == 0:
            raise ShapeError(f"Gabor ksize must be odd and >= 3, got {self.ksize}")
        if self.sigma <= 0:
            raise ShapeError(f"Gabor sigma must be positive, got {self.sigma}")


def rotated_coordinates(theta: float, ksize: int) -> Tuple[np.ndarray, np.ndarray]:
    """(x', y') grids of shape [ksize, ksize] indexed [row, column]"""
    r = (ksize - 1) // 2
    ys, xs = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
    x_rot = xs * math.cos(theta) + ys * math.sin(theta)
    y_rot = -xs * math.sin(theta) + ys * math.cos(theta)
    return x_rot, y_rot


def adaptive_lambda(raw: Union[float, Tensor]) -> Union[float, Tensor]:
    """Effective wavelength clamp(raw, 0.1, 8.0); gradient flows only inside the interval"""
    if isinstance(raw, Tensor):
        return raw.clamp(LAMBDA_MIN, LAMBDA_MAX)
    return float(np.clip(raw, LAMBDA_MIN, LAMBDA_MAX))


def gabor_kernel(spec: GaborSpec) -> Tensor:
    """
    Synthesize one Gabor kernel.

    Args:
        spec: Kernel parameters; a tensor wavelength keeps the kernel differentiable

    Returns:
        Tensor [ksize, ksize]
    """
    spec.validate()
    x_rot, y_rot = rotated_coordinates(spec.theta, spec.ksize)
    envelope = np.exp(-(x_rot**2 + spec.gamma**2 * y_rot**2) / (2.0 * spec.sigma**2))
    wavelength = adaptive_lambda(spec.wavelength)
    if isinstance(wavelength, Tensor):
        phase = Tensor(2.0 * math.pi * x_rot) / wavelength + spec.psi
        return phase.cos() * envelope
    return Tensor(envelope * np.cos(2.0 * math.pi * x_rot / wavelength + spec.psi))


def subband_orientation(band: str) -> float:
    """HL -> 0, LH -> pi/2, HH -> pi/4 (radians)"""
    key = band.lower()
    if key == "ll":
        raise ShapeError("LL has no Gabor orientation; it takes the convolution path")
    if key not in MATCHED_ORIENTATION_DEG:
        raise ShapeError(f"unknown subband {band!r}")
    return math.radians(MATCHED_ORIENTATION_DEG[key])


def parse_direction_strategy(
    strategy: str, rng: Optional[np.random.Generator] = None
) -> Optional[Dict[str, Tuple[float, ...]]]:
    """
    Map an orientation strategy to per-band orientations in radians.

    Strategies: ``matched``, ``misaligned``, ``unified:<deg>``, ``random``,
    ``fused`` and ``conv``. Returns None for ``conv`` (learnable depthwise kernels).
    """
    name, _, arg = strategy.partition(":")
    if name == "matched":
        return {b: (subband_orientation(b),) for b in DETAIL_BANDS}
    if name == "misaligned":
        return {b: (math.radians(MISALIGNED_ORIENTATION_DEG[b]),) for b in DETAIL_BANDS}
    if name == "unified":
        try:
            theta = math.radians(float(arg))
        except ValueError as e:
            raise ConfigError(f"unified direction needs degrees, got {arg!r}") from e
        return {b: (theta,) for b in DETAIL_BANDS}
    if name == "random":
        rng = rng if rng is not None else np.random.default_rng(0)
        return {b: (float(rng.uniform(0.0, math.pi)),) for b in DETAIL_BANDS}
    if name == "fused":
        thetas = tuple(math.radians(d) for d in FUSED_DIRECTIONS_DEG)
        return {b: thetas for b in DETAIL_BANDS}
    if name == "conv":
        return None
    raise ConfigError(f"unknown Gabor direction strategy {strategy!r}")


def parse_lambda_mode(mode: str) -> Tuple[bool, float]:
    """``adaptive`` -> (True, 2.0); ``fixed:<v>`` -> (False, v)"""
    name, _, arg = mode.partition(":")
    if name == "adaptive":
        return True, float(arg) if arg else LAMBDA_INIT
    if name == "fixed":
        try:
            return False, float(arg)
        except ValueError as e:
            raise ConfigError(f"fixed wavelength needs a number, got {arg!r}") from e
    raise ConfigError(f"unknown Gabor wavelength mode {mode!r}")


def depthwise_apply(x: Tensor, kernel: Tensor) -> Tensor:
    """Convolve every channel of ``x`` with the same [k, k] kernel (zero padding, stride 1)"""
    channels = x.shape[1]
    k = kernel.shape[-1]
    weight = kernel.reshape(1, 1, k, k) * np.ones((channels, 1, 1, 1))
    return ops.conv2d(x, weight, None, stride=1, padding=k // 2, groups=channels)


class GaborBank(Module):
    """
    Gabor kernels for a set of bands, one wavelength per band.

    With ``orientations=None`` the bank degrades to learnable 3x3 depthwise
    convolutions (the convolution-only baseline).
    """

    def __init__(
        self,
        channels: int,
        bands: Sequence[str],
        orientations: Optional[Dict[str, Tuple[float, ...]]],
        rng: np.random.Generator,
        adaptive: bool = True,
        wavelength: float = LAMBDA_INIT,
        ksize: int = GABOR_KSIZE,
    ):
        super().__init__()
        self.bands = tuple(bands)
        self.directional = orientations is not None
        self.adaptive = adaptive
        self.ksize = ksize
        self.fixed_wavelength = wavelength
        if orientations is None:
            self.convs = ModuleList([Conv2d(channels, channels, 3, rng, groups=channels) for _ in self.bands])
        else:
            for band in self.bands:
                setattr(self, f"theta_{band}", Buffer(np.array(orientations[band], dtype=np.float64)))
                if adaptive:
                    setattr(self, f"lambda_{band}", Parameter(np.array(wavelength)))

    @property
    def orientations(self) -> Optional[Dict[str, Tuple[float, ...]]]:
        """Per-band orientations in radians, read from the stored buffers"""
        if not self.directional:
            return None
        return {band: tuple(float(t) for t in getattr(self, f"theta_{band}").data) for band in self.bands}

    def wavelength(self, band: str) -> Union[float, Tensor]:
        if self.adaptive:
            return getattr(self, f"lambda_{band}")
        return self.fixed_wavelength

    def kernel(self, band: str) -> Tensor:
        """Band kernel; the mean of the per-orientation kernels when several are fused"""
        thetas = getattr(self, f"theta_{band}").data
        kernels = [gabor_kernel(GaborSpec(self.wavelength(band), float(t), ksize=self.ksize)) for t in thetas]
        if len(kernels) == 1:
            return kernels[0]
        total = kernels[0]
        for k in kernels[1:]:
            total = total + k
        return total * (1.0 / len(kernels))

    def forward(self, band: str, x: Tensor) -> Tensor:
        if not self.directional:
            return self.convs[self.bands.index(band)](x)
        return depthwise_apply(x, self.kernel(band))
