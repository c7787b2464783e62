"""
Tests for the frequency-domain gated feed-forward network.
"""

import numpy as np
import pytest

from dabformer.core.fdagn import FDAGN, FdagnConfig, FreqFilter, patchify, round_to_even, unpatchify
from dabformer.core.gradcheck import grad_check
from dabformer.core.tensor import Tensor, no_grad
from dabformer.utils.exceptions import ShapeError


class TestWidths:
    def test_round_to_even(self):
        assert round_to_even(21.28) == 22
        assert round_to_even(10.64) == 10
        assert round_to_even(3.0) == 4
        assert round_to_even(5.0) == 6

    def test_hidden_width(self):
        assert FdagnConfig(channels=8).hidden == 22
        assert FdagnConfig(channels=4).hidden == 10

    def test_filter_count(self):
        assert FreqFilter.count(22, 8) == 2 * 22 * 8 * 5
        assert FreqFilter(22, 8).num_parameters() == FreqFilter.count(22, 8)

    def test_baseline_differs_only_by_filter(self, rng):
        with_filter = FDAGN(FdagnConfig(channels=8), np.random.default_rng(0))
        plain = FDAGN(FdagnConfig(channels=8, frequency=False), np.random.default_rng(0))
        assert with_filter.num_parameters() - plain.num_parameters() == FreqFilter.count(22, 8)


class TestFrequencyStage:
    """Patchwise FFT filtering."""

    def test_patchify_roundtrip(self, rng):
        x = Tensor(rng.standard_normal((2, 3, 16, 8)))
        patches = patchify(x, 8)
        assert patches.shape == (2, 3, 2, 1, 8, 8)
        np.testing.assert_array_equal(patches.data[0, 1, 1, 0], x.data[0, 1, 8:16, 0:8])
        np.testing.assert_array_equal(unpatchify(patches).data, x.data)

    def test_unit_filter_is_identity(self, rng):
        module = FDAGN(FdagnConfig(channels=4), rng)
        h = Tensor(rng.standard_normal((1, module.config.hidden, 16, 8)))
        np.testing.assert_allclose(module.frequency_stage(h).data, h.data, atol=1e-12)

    def test_unit_filter_matches_plain_network(self):
        x = Tensor(np.random.default_rng(3).standard_normal((1, 4, 8, 16)))
        with_filter = FDAGN(FdagnConfig(channels=4), np.random.default_rng(0))
        plain = FDAGN(FdagnConfig(channels=4, frequency=False), np.random.default_rng(0))
        with no_grad():
            np.testing.assert_allclose(with_filter(x).data, plain(x).data, atol=1e-12)

    def test_filter_scales_single_bin(self, rng):
        module = FDAGN(FdagnConfig(channels=4, patch_size=4), rng)
        module.freq_filter.real.data[...] = 0.0
        module.freq_filter.real.data[:, 0, 0] = 1.0
        h = Tensor(rng.standard_normal((1, module.config.hidden, 4, 4)))
        out = module.frequency_stage(h).data
        # only the DC bin survives, so every patch becomes its mean
        np.testing.assert_allclose(out, np.broadcast_to(h.data.mean(axis=(-2, -1), keepdims=True), out.shape), atol=1e-12)

    def test_indivisible_extent_rejected(self, rng):
        module = FDAGN(FdagnConfig(channels=4), rng)
        with pytest.raises(ShapeError, match="P=8"):
            module(Tensor(rng.standard_normal((1, 4, 12, 8))))

    def test_pad_to_patch(self, rng):
        module = FDAGN(FdagnConfig(channels=4, pad_to_patch=True), rng)
        with no_grad():
            out = module(Tensor(rng.standard_normal((1, 4, 12, 10))))
        assert out.shape == (1, 4, 12, 10)

    def test_wrong_channels(self, rng):
        module = FDAGN(FdagnConfig(channels=4), rng)
        with pytest.raises(ShapeError):
            module(Tensor(rng.standard_normal((1, 5, 8, 8))))


class TestGradients:
    def test_filter_and_input_gradients(self, rng):
        module = FDAGN(FdagnConfig(channels=2, patch_size=4), rng)
        module.freq_filter.real.data[...] = rng.standard_normal(module.freq_filter.real.shape)
        module.freq_filter.imag.data[...] = rng.standard_normal(module.freq_filter.imag.shape)
        x = Tensor(rng.standard_normal((1, 2, 4, 8)))
        weights = rng.standard_normal((1, 2, 4, 8))
        report = grad_check(
            lambda x, re, im: (module(x) * weights).sum(),
            [x, module.freq_filter.real, module.freq_filter.imag],
            max_checks=30,
        )
        assert report.passed, report.max_rel_error
