"""
Tests for the training losses and evaluation metrics.
"""

import math

import numpy as np
import pytest

from dabformer.core.gradcheck import grad_check
from dabformer.core.losses import (
    FeatureExtractor,
    edge_loss,
    evaluate_pair,
    gaussian_window,
    l1_loss,
    masked_psnr,
    masked_ssim,
    perceptual_loss,
    psnr,
    sobel_magnitude,
    ssim,
    ssim_loss,
    total_loss,
)
from dabformer.core.tensor import Tensor
from dabformer.schemas.run_schema import LossWeights
from dabformer.utils.exceptions import ShapeError


@pytest.fixture
def pair(rng):
    gt = rng.uniform(size=(1, 3, 16, 16))
    o = np.clip(gt + 0.05 * rng.standard_normal(gt.shape), 0.0, 1.0)
    return o, gt


class TestMetrics:
    """PSNR and SSIM, whole-image and masked."""

    def test_psnr_identical_is_infinite(self, pair):
        assert psnr(pair[1], pair[1]) == math.inf

    def test_psnr_half(self):
        assert psnr(np.zeros((4, 4)), np.full((4, 4), 0.5)) == pytest.approx(10.0 * math.log10(4.0), abs=1e-12)

    def test_psnr_shape_mismatch(self):
        with pytest.raises(ShapeError):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_ssim_identity(self, pair):
        assert ssim(pair[1], pair[1]).item() == pytest.approx(1.0, abs=1e-12)

    def test_ssim_constant_images_closed_form(self):
        zeros, ones = np.zeros((1, 1, 16, 16)), np.ones((1, 1, 16, 16))
        assert ssim(zeros, ones).item() == pytest.approx(1e-4 / (1.0 + 1e-4), abs=1e-12)

    def test_ssim_drops_with_noise(self, pair):
        assert ssim(*pair).item() < 1.0

    def test_ssim_window_too_large(self):
        with pytest.raises(ShapeError):
            ssim(np.zeros((1, 1, 8, 8)), np.zeros((1, 1, 8, 8)))

    def test_gaussian_window_normalised(self):
        window = gaussian_window()
        assert window.shape == (11, 11)
        assert window.sum() == pytest.approx(1.0)
        assert window[5, 5] == window.max()

    def test_masked_psnr_full_mask_matches_psnr(self, pair):
        assert masked_psnr(*pair, np.ones((16, 16), bool)) == pytest.approx(psnr(*pair))

    def test_masked_psnr_only_sees_masked_pixels(self, pair):
        o, gt = pair
        o = o.copy()
        mask = np.zeros((16, 16), bool)
        mask[4:8, 4:8] = True
        o[..., ~mask] = 0.0
        expected = 10.0 * math.log10(1.0 / np.mean((o[..., mask] - gt[..., mask]) ** 2))
        assert masked_psnr(o, gt, mask) == pytest.approx(expected)

    def test_empty_mask_gives_nan(self, pair):
        empty = np.zeros((16, 16), bool)
        assert math.isnan(masked_psnr(*pair, empty))
        assert math.isnan(masked_ssim(*pair, empty))

    def test_masked_ssim_needs_window_centres(self, pair):
        border = np.zeros((16, 16), bool)
        border[:, :5] = True
        assert math.isnan(masked_ssim(*pair, border))
        border[8, 8] = True
        assert not math.isnan(masked_ssim(*pair, border))

    def test_evaluate_pair_keys(self, pair):
        assert set(evaluate_pair(*pair)) == {"psnr", "ssim"}
        mask = np.ones((16, 16), bool)
        assert set(evaluate_pair(*pair, mask)) == {"psnr", "ssim", "masked_psnr", "masked_ssim"}


class TestLosses:
    """Individual objective terms and their combination."""

    def test_l1(self):
        assert l1_loss(Tensor([0.0, 1.0]), np.array([0.5, 0.0])).item() == pytest.approx(0.75)

    def test_sobel_vertical_step(self):
        image = np.zeros((1, 1, 8, 8))
        image[..., 3:] = 1.0
        magnitude = sobel_magnitude(Tensor(image)).data[0, 0]
        assert magnitude[4, 2] == pytest.approx(4.0, abs=1e-8)
        assert magnitude[4, 3] == pytest.approx(4.0, abs=1e-8)
        assert magnitude[4, 5] == pytest.approx(0.0, abs=1e-3)

    def test_edge_loss_zero_for_identical(self, pair):
        assert edge_loss(Tensor(pair[1]), pair[1]).item() == 0.0

    def test_identity_extractor_reduces_to_l1(self, pair):
        o = Tensor(pair[0])
        assert perceptual_loss(o, pair[1], FeatureExtractor.identity()).item() == pytest.approx(l1_loss(o, pair[1]).item())

    def test_proxy_extractor_pyramid(self, pair):
        features = FeatureExtractor.proxy(seed=0)(Tensor(pair[1]))
        assert [f.shape for f in features] == [(1, 16, 8, 8), (1, 32, 4, 4), (1, 64, 2, 2)]

    def test_perceptual_gradient_reaches_prediction_only(self, pair):
        o = Tensor(pair[0], requires_grad=True)
        gt = Tensor(pair[1], requires_grad=True)
        perceptual_loss(o, gt, FeatureExtractor.proxy()).backward()
        assert o.grad is not None
        assert gt.grad is None

    def test_total_loss_weights_terms(self, pair):
        o = Tensor(pair[0])
        weights = LossWeights()
        only_l1 = total_loss(o, pair[1], weights, FeatureExtractor.identity(), terms=["l1"])
        assert only_l1.total.item() == pytest.approx(10.0 * only_l1.components["l1"])
        assert only_l1.components["perceptual"] == 0.0

        full = total_loss(o, pair[1], weights, FeatureExtractor.identity())
        c = full.components
        expected = 10.0 * c["l1"] + 0.6 * c["perceptual"] + 0.4 * c["edge"] + 0.5 * c["ssim"]
        assert full.total.item() == pytest.approx(expected)

    def test_total_loss_needs_a_term(self, pair):
        with pytest.raises(ShapeError):
            total_loss(Tensor(pair[0]), pair[1], LossWeights(), FeatureExtractor.identity(), terms=[])

    def test_feature_extractor_from_npz(self, tmp_path, rng):
        path = tmp_path / "features.npz"
        np.savez(path, w0=rng.standard_normal((4, 3, 3, 3)), b0=np.zeros(4))
        features = FeatureExtractor.from_npz(path)(Tensor(rng.uniform(size=(1, 3, 8, 8))))
        assert [f.shape for f in features] == [(1, 4, 4, 4)]


class TestLossGradients:
    def test_ssim_loss_gradient(self, rng):
        gt = rng.uniform(size=(1, 1, 12, 12))
        o = Tensor(np.clip(gt + 0.1 * rng.standard_normal(gt.shape), 0.0, 1.0))
        report = grad_check(lambda t: ssim_loss(t, gt), o, max_checks=30)
        assert report.passed, report.max_rel_error

    def test_edge_loss_gradient(self, rng):
        gt = rng.uniform(size=(1, 2, 6, 6))
        o = Tensor(rng.uniform(size=(1, 2, 6, 6)))
        report = grad_check(lambda t: edge_loss(t, gt), o, max_checks=30)
        assert report.passed, report.max_rel_error
