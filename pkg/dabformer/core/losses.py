"""
Losses and Metrics

Training objective L = w1 * L1 + wP * perceptual + wE * edge + wM * (1 - SSIM)
and the PSNR / SSIM evaluation metrics, including masked-region variants.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from dabformer.core import ops
from dabformer.core.module import trunc_normal
from dabformer.core.tensor import Tensor, as_tensor, no_grad
from dabformer.schemas.run_schema import LossWeights
from dabformer.utils.constants import LOSS_TERMS, SOBEL_EPS, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW
from dabformer.utils.exceptions import ShapeError

logger = logging.getLogger(__name__)

ArrayOrTensor = Union[np.ndarray, Tensor]

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()


def _check_pair(o: Tensor, gt: Tensor) -> None:
    if o.shape != gt.shape:
        raise ShapeError("prediction and target shapes differ", details=f"{o.shape} vs {gt.shape}")


def l1_loss(o: Tensor, gt: ArrayOrTensor) -> Tensor:
    gt = as_tensor(gt)
    _check_pair(o, gt)
    return (o - gt).abs().mean()


# ------------------------------------------------------------------ perceptual
class FeatureExtractor:
    """
    Frozen feature pyramid: stride-2 3x3 convolutions each followed by GELU.

    The default is a fixed-seed random pyramid 3 -> 16 -> 32 -> 64. Pretrained
    weights can be loaded from an ``.npz`` file holding ``w0, b0, w1, b1, ...``.
    With no stages the extractor returns its input as the single feature map.
    """

    def __init__(self, stages: Sequence[Tuple[np.ndarray, np.ndarray]] = ()):
        self.stages = [(Tensor(w), Tensor(b)) for w, b in stages]

    @classmethod
    def proxy(cls, seed: int = 0, channels: Sequence[int] = (3, 16, 32, 64)) -> "FeatureExtractor":
        rng = np.random.default_rng(seed)
        stages = []
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            std = math.sqrt(2.0 / (c_in * 9))
            stages.append((trunc_normal(rng, (c_out, c_in, 3, 3), std), np.zeros(c_out)))
        return cls(stages)

    @classmethod
    def identity(cls) -> "FeatureExtractor":
        return cls(())

    @classmethod
    def from_npz(cls, path: Union[str, Path]) -> "FeatureExtractor":
        with np.load(path) as archive:
            count = len([k for k in archive.files if k.startswith("w")])
            stages = [(archive[f"w{i}"], archive[f"b{i}"]) for i in range(count)]
        logger.info(f"Loaded {len(stages)} perceptual stages from {path}")
        return cls(stages)

    def __call__(self, x: Tensor) -> List[Tensor]:
        if not self.stages:
            return [x]
        features = []
        for w, b in self.stages:
            x = ops.gelu(ops.conv2d(x, w, b, stride=2, padding=1))
            features.append(x)
        return features


def perceptual_loss(o: Tensor, gt: ArrayOrTensor, extractor: FeatureExtractor) -> Tensor:
    """Sum over stages of the mean absolute feature difference; gradients reach ``o`` only"""
    gt = as_tensor(gt)
    _check_pair(o, gt)
    with no_grad():
        targets = extractor(gt)
    total = None
    for fo, ft in zip(extractor(o), targets):
        if fo.shape != ft.shape:
            raise ShapeError("feature stage shapes differ", details=f"{fo.shape} vs {ft.shape}")
        term = (fo - ft).abs().mean()
        total = term if total is None else total + term
    return total


# ------------------------------------------------------------------------ edge
def _depthwise(x: Tensor, kernel: np.ndarray, padding: int) -> Tensor:
    channels = x.shape[1]
    k = kernel.shape[-1]
    weight = np.broadcast_to(kernel, (channels, 1, k, k)).copy()
    return ops.conv2d(x, Tensor(weight), None, stride=1, padding=padding, groups=channels)


def sobel_magnitude(x: Tensor) -> Tensor:
    """Per-channel sqrt(Gx^2 + Gy^2 + eps) with zero padding"""
    gx = _depthwise(x, SOBEL_X, 1)
    gy = _depthwise(x, SOBEL_Y, 1)
    return (gx * gx + gy * gy + SOBEL_EPS).sqrt()


def edge_loss(o: Tensor, gt: ArrayOrTensor) -> Tensor:
    gt = as_tensor(gt)
    _check_pair(o, gt)
    return (sobel_magnitude(gt) - sobel_magnitude(o)).abs().mean()


# ------------------------------------------------------------------------ SSIM
def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim_map(o: ArrayOrTensor, gt: ArrayOrTensor) -> Tensor:
    """Local SSIM over valid window positions, [B, C, H - 10, W - 10] for the 11x11 window"""
    o, gt = as_tensor(o), as_tensor(gt)
    _check_pair(o, gt)
    height, width = o.shape[-2:]
    if height < SSIM_WINDOW or width < SSIM_WINDOW:
        raise ShapeError(f"SSIM window {SSIM_WINDOW} larger than image {height}x{width}")
    window = gaussian_window()
    mu_o = _depthwise(o, window, 0)
    mu_g = _depthwise(gt, window, 0)
    var_o = _depthwise(o * o, window, 0) - mu_o * mu_o
    var_g = _depthwise(gt * gt, window, 0) - mu_g * mu_g
    cov = _depthwise(o * gt, window, 0) - mu_o * mu_g
    numerator = (mu_o * mu_g * 2.0 + SSIM_C1) * (cov * 2.0 + SSIM_C2)
    denominator = (mu_o * mu_o + mu_g * mu_g + SSIM_C1) * (var_o + var_g + SSIM_C2)
    return numerator / denominator


def ssim(o: ArrayOrTensor, gt: ArrayOrTensor) -> Tensor:
    return ssim_map(o, gt).mean()


def ssim_loss(o: Tensor, gt: ArrayOrTensor) -> Tensor:
    return 1.0 - ssim(o, gt)


# ----------------------------------------------------------------------- total
@dataclass
class LossResult:
    total: Tensor
    components: Dict[str, float] = field(default_factory=dict)


def total_loss(
    o: Tensor,
    gt: ArrayOrTensor,
    weights: LossWeights,
    extractor: FeatureExtractor,
    terms: Sequence[str] = LOSS_TERMS,
) -> LossResult:
    """
    Weighted objective over the enabled terms.

    Disabled terms are not computed and contribute 0.

    Returns:
        LossResult with the differentiable total and the unweighted component values
    """
    gt = as_tensor(gt)
    functions = {
        "l1": lambda: l1_loss(o, gt),
        "perceptual": lambda: perceptual_loss(o, gt, extractor),
        "edge": lambda: edge_loss(o, gt),
        "ssim": lambda: ssim_loss(o, gt),
    }
    total = None
    components = {name: 0.0 for name in LOSS_TERMS}
    for name in LOSS_TERMS:
        if name not in terms:
            continue
        value = functions[name]()
        components[name] = value.item()
        term = value * getattr(weights, name)
        total = term if total is None else total + term
    if total is None:
        raise ShapeError("at least one loss term must be enabled")
    return LossResult(total, components)


# --------------------------------------------------------------------- metrics
def _numpy(x: ArrayOrTensor) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def psnr(o: ArrayOrTensor, gt: ArrayOrTensor) -> float:
    """10 log10(1 / MSE) for data range 1; identical images give +inf"""
    a, b = _numpy(o), _numpy(gt)
    if a.shape != b.shape:
        raise ShapeError("prediction and target shapes differ", details=f"{a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def masked_psnr(o: ArrayOrTensor, gt: ArrayOrTensor, mask: np.ndarray) -> float:
    """PSNR over pixels where ``mask`` [H, W] is set; NaN for an empty mask"""
    a, b = _numpy(o), _numpy(gt)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return math.nan
    diff = (a - b)[..., mask]
    mse = float(np.mean(diff**2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def masked_ssim(o: ArrayOrTensor, gt: ArrayOrTensor, mask: np.ndarray) -> float:
    """Mean SSIM over windows whose centre lies inside ``mask``; NaN when none does"""
    with no_grad():
        local = ssim_map(o, gt).data
    r = SSIM_WINDOW // 2
    mask = np.asarray(mask, dtype=bool)
    centres = mask[r : mask.shape[0] - r, r : mask.shape[1] - r]
    if not centres.any():
        return math.nan
    return float(local[..., centres].mean())


def evaluate_pair(o: ArrayOrTensor, gt: ArrayOrTensor, mask: Optional[np.ndarray] = None) -> Dict[str, float]:
    """PSNR and SSIM of one prediction, plus masked-region values when a mask is given"""
    with no_grad():
        result = {"psnr": psnr(o, gt), "ssim": ssim(o, gt).item()}
    if mask is not None:
        result["masked_psnr"] = masked_psnr(o, gt, mask)
        result["masked_ssim"] = masked_ssim(o, gt, mask)
    return result
