"""
Verification Service

This service runs the oracle suites: transform identities, Gabor point values,
finite-difference gradient checks, architectural identities and loss closed
forms. Each check reports pass/fail with its measured error.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from dabformer.core import ops
from dabformer.core.block import DabformerBlock
from dabformer.core.fdagn import FDAGN, FdagnConfig
from dabformer.core.fdfa import FDFA, FdfaConfig, attention_flops
from dabformer.core.gabor import DETAIL_BANDS, GaborSpec, adaptive_lambda, depthwise_apply, gabor_kernel
from dabformer.core.gradcheck import grad_check
from dabformer.core.losses import FeatureExtractor, edge_loss, l1_loss, perceptual_loss, psnr, ssim, total_loss
from dabformer.core.model import Dabformer
from dabformer.core.module import Conv2d
from dabformer.core.spectral import Subbands, complex_pointwise_filter, dwt2, idwt2, irfft2, rfft2
from dabformer.core.tensor import Tensor, no_grad
from dabformer.schemas.model_schema import ModelConfig
from dabformer.schemas.run_schema import LossWeights
from dabformer.services import oracles
from dabformer.utils.constants import GABOR_GAMMA, GABOR_PSI, GABOR_SIGMA, LAYER_NORM_EPS
from dabformer.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

GRAD_TOL = 1e-4


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    error: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.suite:<13} {self.name:<38} err={self.error:.3e} tol={self.tolerance:.0e}"


Check = Callable[[np.random.Generator], float]


def _max_abs(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


# ------------------------------------------------------------------ transforms
def check_haar_roundtrip(rng: np.random.Generator) -> float:
    x = Tensor(rng.standard_normal((2, 3, 8, 8)))
    return _max_abs(idwt2(dwt2(x)).data, x.data)


def check_haar_energy(rng: np.random.Generator) -> float:
    x = Tensor(rng.standard_normal((1, 2, 8, 8)))
    energy = float(np.sum(x.data**2))
    return abs(dwt2(x).energy() - energy) / energy


def check_haar_oracle(rng: np.random.Generator) -> float:
    image = rng.standard_normal((6, 8))
    bands = dwt2(Tensor(image))
    return max(_max_abs(t.data, ref) for t, ref in zip(bands, oracles.haar_loop(image)))


def check_haar_example(rng: np.random.Generator) -> float:
    bands = dwt2(Tensor([[1.0, 2.0], [3.0, 4.0]]))
    return _max_abs([t.data.item() for t in bands], [5.0, -2.0, -1.0, 0.0])


def check_rfft_oracle(rng: np.random.Generator) -> float:
    worst = 0.0
    for height, width in ((2, 2), (4, 6), (8, 8), (5, 7)):
        image = rng.standard_normal((height, width))
        spectrum = rfft2(Tensor(image))
        worst = max(worst, _max_abs(spectrum.to_numpy(), oracles.dft2_brute(image)))
    return worst


def check_rfft_roundtrip(rng: np.random.Generator) -> float:
    x = Tensor(rng.standard_normal((2, 8, 6)))
    return _max_abs(irfft2(rfft2(x), 8, 6).data, x.data)


def check_conv_oracle(rng: np.random.Generator) -> float:
    x = rng.standard_normal((2, 4, 7, 6))
    worst = 0.0
    for groups, stride, padding in ((1, 1, 1), (2, 2, 1), (4, 1, 0)):
        w = rng.standard_normal((4, 4 // groups, 3, 3))
        b = rng.standard_normal(4)
        got = ops.conv2d(Tensor(x), Tensor(w), Tensor(b), stride, padding, groups).data
        worst = max(worst, _max_abs(got, oracles.conv2d_loop(x, w, b, stride, padding, groups)))
    return worst


def check_pixel_shuffle(rng: np.random.Generator) -> float:
    x = Tensor(rng.standard_normal((1, 3, 8, 8)))
    return _max_abs(ops.pixel_shuffle(ops.pixel_unshuffle(x, 2), 2).data, x.data)


def check_haar_inverse_example(rng: np.random.Generator) -> float:
    zero = Tensor(np.zeros((1, 1, 1, 1)))
    restored = idwt2(Subbands(Tensor(np.full((1, 1, 1, 1), 2.0)), zero, zero, zero))
    return _max_abs(restored.data, np.ones((1, 1, 2, 2)))


def check_pointwise_filter_convolution(rng: np.random.Generator) -> float:
    """Filtering the half-spectrum equals circular convolution with the filter's inverse transform"""
    image = rng.standard_normal((4, 4))
    filt = rfft2(Tensor(rng.standard_normal((4, 4))))
    got = irfft2(complex_pointwise_filter(rfft2(Tensor(image)), filt), 4, 4).data
    kernel = irfft2(filt, 4, 4).data
    return _max_abs(got, oracles.circular_conv_loop(image, kernel))


def check_softmax_example(rng: np.random.Generator) -> float:
    return _max_abs(ops.softmax(Tensor([0.0, math.log(3.0)])).data, [0.25, 0.75])


def check_gelu_values(rng: np.random.Generator) -> float:
    values = [-2.0, -0.5, 0.3, 4.0]
    return _max_abs(ops.gelu(Tensor(values)).data, [oracles.gelu_scalar(v) for v in values])


def check_layer_norm_oracle(rng: np.random.Generator) -> float:
    x = rng.standard_normal((2, 5, 3, 3))
    gamma, beta = rng.standard_normal(5), rng.standard_normal(5)
    got = ops.layer_norm(Tensor(x), Tensor(gamma), Tensor(beta), LAYER_NORM_EPS).data
    return _max_abs(got, oracles.layer_norm_loop(x, gamma, beta, LAYER_NORM_EPS))


# ----------------------------------------------------------------------- gabor
def check_gabor_oracle(rng: np.random.Generator) -> float:
    worst = 0.0
    for _ in range(20):
        wavelength = float(rng.uniform(0.5, 8.0))
        theta = float(rng.uniform(0.0, math.pi))
        psi = float(rng.uniform(-math.pi, math.pi))
        sigma = float(rng.uniform(1.0, 8.0))
        gamma = float(rng.uniform(0.2, 1.0))
        ksize = int(rng.choice([3, 5, 7, 9]))
        got = gabor_kernel(GaborSpec(wavelength, theta, psi, sigma, gamma, ksize)).data
        worst = max(worst, _max_abs(got, oracles.gabor_kernel_loop(ksize, wavelength, theta, psi, sigma, gamma)))
    return worst


def check_gabor_points(rng: np.random.Generator) -> float:
    kernel = gabor_kernel(GaborSpec(2.0, 0.0, GABOR_PSI, GABOR_SIGMA, GABOR_GAMMA, 7)).data
    expected = -math.exp(-1.0 / (8.0 * math.pi**2))
    return max(abs(kernel[3, 3] - 1.0), abs(kernel[3, 4] - expected))


# ------------------------------------------------------------------- gradients
def _grad(f, inputs, max_checks: Optional[int] = None) -> float:
    return grad_check(f, inputs, max_checks=max_checks).max_rel_error


def check_grad_square_sum(rng: np.random.Generator) -> float:
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    (x**2).sum().backward()
    return max(_max_abs(x.grad, [2.0, 4.0, 6.0]), _grad(lambda x: (x**2).sum(), x))


def check_grad_gelu_points(rng: np.random.Generator) -> float:
    return _grad(lambda x: ops.gelu(x).sum(), Tensor([-2.0, -0.5, 0.3, 4.0]))


def check_grad_conv(rng: np.random.Generator) -> float:
    x = Tensor(rng.standard_normal((1, 4, 5, 5)))
    w = Tensor(rng.standard_normal((4, 2, 3, 3)))
    b = Tensor(rng.standard_normal(4))
    return _grad(lambda x, w, b: (ops.conv2d(x, w, b, 2, 1, 2) ** 2).sum(), [x, w, b])


def check_grad_layer_norm(rng: np.random.Generator) -> float:
    x = Tensor(rng.standard_normal((2, 4, 3, 3)))
    g = Tensor(rng.standard_normal(4))
    b = Tensor(rng.standard_normal(4))
    weights = rng.standard_normal((2, 4, 3, 3))
    return _grad(lambda x, g, b: (ops.layer_norm(x, g, b) * weights).sum(), [x, g, b])


def check_grad_softmax_gelu(rng: np.random.Generator) -> float:
    x = Tensor(rng.standard_normal((3, 5)))
    weights = rng.standard_normal((3, 5))
    return _grad(lambda x: (ops.softmax(ops.gelu(x), axis=-1) * weights).sum(), x)


def check_grad_spectral(rng: np.random.Generator) -> float:
    x = Tensor(rng.standard_normal((2, 4, 6)))
    wr, wi = rng.standard_normal((2, 4, 4))

    def f(x):
        s = dwt2(x)
        spectrum = rfft2(s.hl + s.ll * 0.5)
        return (irfft2(spectrum, 2, 3) ** 2).sum() + (spectrum.real * wr[:2, :2]).sum() + (spectrum.imag * wi[:2, :2]).sum()

    return _grad(f, x)


def check_grad_gabor_lambda(rng: np.random.Generator) -> float:
    wavelength = Tensor(np.array(2.3))
    weights = rng.standard_normal((7, 7))
    return _grad(lambda lam: (gabor_kernel(GaborSpec(lam, math.pi / 4)) * weights).sum(), wavelength)


def check_grad_fdfa(rng: np.random.Generator) -> float:
    module = FDFA(FdfaConfig(channels=4, heads=2), rng)
    x = Tensor(rng.standard_normal((1, 4, 4, 4)))
    weights = rng.standard_normal((1, 4, 4, 4))
    return _grad(lambda x, lam: (module(x) * weights).sum(), [x, module.query_path.bank.lambda_hl])


def check_grad_fdagn_filter(rng: np.random.Generator) -> float:
    module = FDAGN(FdagnConfig(channels=2, patch_size=4), rng)
    module.freq_filter.real.data = module.freq_filter.real.data + rng.standard_normal(module.freq_filter.real.shape) * 0.1
    x = Tensor(rng.standard_normal((1, 2, 4, 8)))
    weights = rng.standard_normal((1, 2, 4, 8))
    f = lambda re, im: (module(x) * weights).sum()  # noqa: E731
    return _grad(f, [module.freq_filter.real, module.freq_filter.imag], max_checks=24)


def check_grad_block(rng: np.random.Generator) -> float:
    block = DabformerBlock(FdfaConfig(channels=4, heads=1), FdagnConfig(channels=4, patch_size=4), rng)
    x = Tensor(rng.standard_normal((1, 4, 4, 4)))
    weights = rng.standard_normal((1, 4, 4, 4))
    return _grad(lambda x: (block(x) * weights).sum(), x)


def check_grad_model(rng: np.random.Generator) -> float:
    model = Dabformer(ModelConfig(base_channels=4, blocks=[1, 1, 1, 1]), seed=0)
    x = Tensor(rng.uniform(size=(1, 3, 16, 16)))
    weights = rng.standard_normal((1, 3, 16, 16))
    return _grad(lambda x: (model(x) * weights).sum(), x, max_checks=24)


def check_grad_losses(rng: np.random.Generator) -> float:
    o = Tensor(rng.uniform(size=(1, 3, 16, 16)))
    gt = rng.uniform(size=(1, 3, 16, 16))
    extractor = FeatureExtractor.proxy(seed=0)
    return _grad(lambda o: total_loss(o, gt, LossWeights(), extractor).total, o, max_checks=32)


# ---------------------------------------------------------------- architecture
def check_attention_rows(rng: np.random.Generator) -> float:
    module = FDFA(FdfaConfig(channels=8, heads=2), rng)
    with no_grad():
        module(Tensor(rng.standard_normal((2, 8, 8, 8))))
    return float(np.max(np.abs(module.last_attention.sum(axis=-1) - 1.0)))


def check_fdfa_oracle(rng: np.random.Generator) -> float:
    module = FDFA(FdfaConfig(channels=4, heads=1), rng)
    x = rng.standard_normal((1, 4, 2, 2))
    with no_grad():
        got = module(Tensor(x)).data
    return _max_abs(got, oracles.fdfa_reference(module, x))


def check_fdagn_identity(rng: np.random.Generator) -> float:
    module = FDAGN(FdagnConfig(channels=4), rng)
    h = Tensor(rng.standard_normal((1, module.config.hidden, 8, 16)))
    with no_grad():
        return _max_abs(module.frequency_stage(h).data, h.data)


def check_zero_model(rng: np.random.Generator) -> float:
    model = Dabformer(ModelConfig(base_channels=4, blocks=[1, 1, 1, 1]), seed=0)
    model.reconstruct.weight.data[...] = 0.0
    model.reconstruct.bias.data[...] = 0.0
    x = rng.uniform(size=(1, 3, 17, 20))
    with no_grad():
        return _max_abs(model(Tensor(x)).data, x)


def check_attention_flops(rng: np.random.Generator) -> float:
    return float(abs(attention_flops(8, 64, 1) - 8192))


def check_fdf_composition(rng: np.random.Generator) -> float:
    """Fusion module against dwt2, per-band Gabor filtering and idwt2 applied one by one"""
    fusion = FDFA(FdfaConfig(channels=4), rng).query_path
    bank = fusion.bank
    x = Tensor(rng.standard_normal((1, 4, 8, 8)))
    with no_grad():
        s = dwt2(x)
        enhanced = [fusion.ll_path.pointwise(fusion.ll_path.depthwise(s.ll))]
        for band, t in zip(DETAIL_BANDS, (s.hl, s.lh, s.hh)):
            (theta,) = bank.orientations[band]
            wavelength = adaptive_lambda(float(bank.wavelength(band).data))
            kernel = oracles.gabor_kernel_loop(bank.ksize, wavelength, theta, GABOR_PSI, GABOR_SIGMA, GABOR_GAMMA)
            enhanced.append(depthwise_apply(t, Tensor(kernel)))
        expected = idwt2(Subbands(*enhanced)).data
        got = fusion(x).data
    return _max_abs(got, expected)


def check_dc_bin_removal(rng: np.random.Generator) -> float:
    """A filter of ones with a zeroed DC bin subtracts every patch's mean"""
    module = FDAGN(FdagnConfig(channels=4), rng)
    module.freq_filter.real.data[:, 0, 0] = 0.0
    p = module.config.patch_size
    h = rng.standard_normal((1, module.config.hidden, 8, 16))
    with no_grad():
        got = module.frequency_stage(Tensor(h)).data
    batch, channels, height, width = h.shape
    patches = h.reshape(batch, channels, height // p, p, width // p, p)
    expected = patches - patches.mean(axis=(3, 5), keepdims=True)
    return _max_abs(got, expected.reshape(h.shape))


def check_block_composition(rng: np.random.Generator) -> float:
    block = DabformerBlock(FdfaConfig(channels=4), FdagnConfig(channels=4, patch_size=4), rng)
    block.norm1.weight.data = rng.uniform(0.5, 1.5, 4)
    block.norm2.bias.data = rng.standard_normal(4) * 0.1
    x = Tensor(rng.standard_normal((1, 4, 8, 8)))
    with no_grad():
        got = block(x).data - x.data
        attn = block.attn(ops.layer_norm(x, block.norm1.weight, block.norm1.bias, LAYER_NORM_EPS), residual=False)
        ffn = block.ffn(ops.layer_norm(x + attn, block.norm2.weight, block.norm2.bias, LAYER_NORM_EPS))
    return _max_abs(got, attn.data + ffn.data)


def check_conv_param_count(rng: np.random.Generator) -> float:
    return float(abs(Conv2d(3, 8, 3, rng).num_parameters() - 224))


# ---------------------------------------------------------------------- losses
def check_ssim_identity(rng: np.random.Generator) -> float:
    x = rng.uniform(size=(1, 3, 16, 16))
    return abs(ssim(x, x).item() - 1.0)


def check_ssim_constants(rng: np.random.Generator) -> float:
    zeros, ones = np.zeros((1, 3, 16, 16)), np.ones((1, 3, 16, 16))
    return abs(ssim(zeros, ones).item() - oracles.ssim_constant_images())


def check_psnr_half(rng: np.random.Generator) -> float:
    return abs(psnr(np.full((1, 3, 4, 4), 0.5), np.zeros((1, 3, 4, 4))) - 10.0 * math.log10(4.0))


def check_l1_oracle(rng: np.random.Generator) -> float:
    a, b = rng.uniform(size=(1, 3, 5, 5)), rng.uniform(size=(1, 3, 5, 5))
    return abs(l1_loss(Tensor(a), b).item() - oracles.l1_loop(a, b))


def check_edge_oracle(rng: np.random.Generator) -> float:
    o = np.zeros((1, 1, 8, 8))
    o[..., 4:] = 1.0
    gt = np.zeros((1, 1, 8, 8))
    expected = np.mean(np.abs(oracles.sobel_loop(gt[0, 0], 1e-8) - oracles.sobel_loop(o[0, 0], 1e-8)))
    return abs(edge_loss(Tensor(o), gt).item() - expected)


def check_perceptual_oracle(rng: np.random.Generator) -> float:
    extractor = FeatureExtractor.proxy(seed=0, channels=(3, 4, 4))
    o, gt = rng.uniform(size=(1, 3, 8, 8)), rng.uniform(size=(1, 3, 8, 8))
    stages = [(w.data, b.data) for w, b in extractor.stages]
    return abs(perceptual_loss(Tensor(o), gt, extractor).item() - oracles.perceptual_loop(o, gt, stages))


def check_total_linearity(rng: np.random.Generator) -> float:
    o, gt = Tensor(rng.uniform(size=(1, 3, 16, 16))), rng.uniform(size=(1, 3, 16, 16))
    extractor = FeatureExtractor.proxy(seed=0)
    with no_grad():
        result = total_loss(o, gt, LossWeights(), extractor)
    weights = LossWeights()
    expected = sum(getattr(weights, k) * v for k, v in result.components.items())
    return abs(result.total.item() - expected)


def check_l1_weighted_example(rng: np.random.Generator) -> float:
    gt = rng.uniform(0.0, 0.5, size=(1, 3, 8, 8))
    with no_grad():
        result = total_loss(Tensor(gt + 0.1), gt, LossWeights(), FeatureExtractor.identity(), terms=("l1",))
    return abs(result.total.item() - 1.0)


SUITES: Dict[str, List[Tuple[str, Check, float]]] = {
    "transforms": [
        ("haar roundtrip", check_haar_roundtrip, 1e-12),
        ("haar energy identity", check_haar_energy, 1e-9),
        ("haar vs block loop", check_haar_oracle, 1e-12),
        ("haar 2x2 example", check_haar_example, 1e-12),
        ("rfft2 vs brute-force DFT", check_rfft_oracle, 1e-10),
        ("rfft2/irfft2 roundtrip", check_rfft_roundtrip, 1e-12),
        ("conv2d vs direct loop", check_conv_oracle, 1e-12),
        ("pixel shuffle inverse", check_pixel_shuffle, 0.0),
        ("haar inverse of LL=2", check_haar_inverse_example, 1e-12),
        ("pointwise filter = circular conv", check_pointwise_filter_convolution, 1e-10),
        ("softmax(0, ln 3) = (1/4, 3/4)", check_softmax_example, 1e-14),
        ("gelu vs erf evaluator", check_gelu_values, 1e-14),
        ("layer_norm vs direct loop", check_layer_norm_oracle, 1e-10),
    ],
    "gabor": [
        ("kernel vs scalar evaluator", check_gabor_oracle, 1e-12),
        ("G(0,0)=1, G(1,0)=-exp(-1/8pi^2)", check_gabor_points, 1e-12),
    ],
    "gradients": [
        ("sum(x^2) at (1, 2, 3)", check_grad_square_sum, 1e-8),
        ("gelu at reference points", check_grad_gelu_points, 1e-6),
        ("conv2d", check_grad_conv, GRAD_TOL),
        ("layer_norm", check_grad_layer_norm, GRAD_TOL),
        ("softmax, gelu", check_grad_softmax_gelu, GRAD_TOL),
        ("dwt2, rfft2, irfft2", check_grad_spectral, GRAD_TOL),
        ("gabor wavelength", check_grad_gabor_lambda, GRAD_TOL),
        ("fdfa", check_grad_fdfa, GRAD_TOL),
        ("fdagn frequency filter", check_grad_fdagn_filter, GRAD_TOL),
        ("block", check_grad_block, GRAD_TOL),
        ("model 1x3x16x16 C0=4", check_grad_model, GRAD_TOL),
        ("total loss", check_grad_losses, GRAD_TOL),
    ],
    "architecture": [
        ("attention rows sum to 1", check_attention_rows, 1e-12),
        ("fdfa vs step-by-step reference", check_fdfa_oracle, 1e-10),
        ("fdagn identity frequency stage", check_fdagn_identity, 1e-10),
        ("zero reconstruction is identity", check_zero_model, 0.0),
        ("attention flops C=8 M=64", check_attention_flops, 0.0),
        ("fusion vs composed dwt/gabor/idwt", check_fdf_composition, 1e-12),
        ("zeroed DC bin removes patch means", check_dc_bin_removal, 1e-10),
        ("block = x + attn + ffn terms", check_block_composition, 1e-12),
        ("3x3 conv 3->8 has 224 params", check_conv_param_count, 0.0),
    ],
    "losses": [
        ("ssim(x, x) = 1", check_ssim_identity, 1e-12),
        ("ssim constant 0 vs 1", check_ssim_constants, 1e-12),
        ("psnr of 0.5 difference", check_psnr_half, 1e-12),
        ("l1 vs loop", check_l1_oracle, 1e-14),
        ("edge vs Sobel loop", check_edge_oracle, 1e-12),
        ("perceptual vs loop", check_perceptual_oracle, 1e-12),
        ("total loss weighted sum", check_total_linearity, 1e-12),
        ("l1 of 0.1 weighted to 1.0", check_l1_weighted_example, 1e-12),
    ],
}


class VerifyService:
    """Service for running the oracle suites"""

    def __init__(self, seed: int = 0, suites: Optional[List[str]] = None):
        self.seed = seed
        self.suites = suites or list(SUITES)
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ConfigError(f"unknown verify suite {', '.join(unknown)}", details=f"choose from {', '.join(SUITES)}")

    def run(self) -> List[CheckResult]:
        results = []
        for suite in self.suites:
            for name, check, tolerance in SUITES[suite]:
                rng = np.random.default_rng(self.seed)
                try:
                    error = float(check(rng))
                except Exception as e:
                    logger.error(f"{suite}/{name} raised {type(e).__name__}: {e}")
                    error = math.inf
                result = CheckResult(suite, name, error <= tolerance, error, tolerance)
                logger.info(result.line())
                results.append(result)
        failed = sum(not r.passed for r in results)
        logger.info(f"{len(results) - failed}/{len(results)} checks passed")
        return results
