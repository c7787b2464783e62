"""
Tests for frequency-domain fused attention.
"""

import math

import numpy as np
import pytest

from dabformer.core.fdfa import FDFA, FdfaConfig, attention_flops, query_param_count
from dabformer.core.gradcheck import grad_check
from dabformer.core.tensor import Tensor, no_grad
from dabformer.services import oracles
from dabformer.utils.exceptions import ShapeError


def query_params(module: FDFA) -> int:
    path = module.query_path.num_parameters() if module.query_path is not None else 0
    return path + module.q_proj.num_parameters()


class TestFDFA:
    """Forward semantics of the attention module."""

    def test_matches_step_by_step_reference(self, rng):
        module = FDFA(FdfaConfig(channels=4, heads=1), rng)
        x = rng.standard_normal((1, 4, 4, 4))
        with no_grad():
            got = module(Tensor(x)).data
        np.testing.assert_allclose(got, oracles.fdfa_reference(module, x), atol=1e-10)

    def test_attention_rows_are_distributions(self, rng):
        module = FDFA(FdfaConfig(channels=8, heads=2), rng)
        with no_grad():
            module(Tensor(rng.standard_normal((2, 8, 6, 6))))
        attention = module.last_attention
        assert attention.shape == (2, 2, 4, 4)
        assert np.all(attention >= 0.0)
        np.testing.assert_allclose(attention.sum(axis=-1), 1.0, atol=1e-12)

    def test_temperature_initialised_per_head(self, rng):
        module = FDFA(FdfaConfig(channels=16, heads=4), rng)
        assert module.temperature.shape == (4, 1, 1)
        np.testing.assert_allclose(module.temperature.data, math.sqrt(4.0))

    def test_residual_flag(self, rng):
        module = FDFA(FdfaConfig(channels=4, heads=2), rng)
        x = Tensor(rng.standard_normal((1, 4, 4, 4)))
        with no_grad():
            with_residual = module(x).data
            branch = module(x, residual=False).data
        np.testing.assert_allclose(with_residual - branch, x.data, atol=1e-12)

    def test_output_shape_follows_input(self, rng):
        module = FDFA(FdfaConfig(channels=8, heads=2), rng)
        with no_grad():
            out = module(Tensor(rng.standard_normal((3, 8, 6, 10))))
        assert out.shape == (3, 8, 6, 10)

    def test_heads_must_divide_channels(self, rng):
        with pytest.raises(ShapeError, match="divisible"):
            FDFA(FdfaConfig(channels=6, heads=4), rng)

    def test_wrong_channel_count(self, rng):
        module = FDFA(FdfaConfig(channels=4), rng)
        with pytest.raises(ShapeError):
            module(Tensor(rng.standard_normal((1, 3, 4, 4))))

    def test_fused_query_needs_even_extent(self, rng):
        module = FDFA(FdfaConfig(channels=4), rng)
        with pytest.raises(ShapeError, match="even"):
            module(Tensor(rng.standard_normal((1, 4, 5, 4))))

    def test_plain_query_accepts_odd_extent(self, rng):
        module = FDFA(FdfaConfig(channels=4, q_path="plain"), rng)
        with no_grad():
            assert module(Tensor(rng.standard_normal((1, 4, 5, 3)))).shape == (1, 4, 5, 3)

    def test_gradients_including_wavelength(self, rng):
        module = FDFA(FdfaConfig(channels=4, heads=2), rng)
        x = Tensor(rng.standard_normal((1, 4, 4, 4)))
        weights = rng.standard_normal((1, 4, 4, 4))
        report = grad_check(
            lambda x, lam, t: (module(x) * weights).sum(),
            [x, module.query_path.bank.lambda_hl, module.temperature],
            max_checks=24,
        )
        assert report.passed, report.max_rel_error


class TestQueryVariants:
    """Query-path ablations and their parameter counts."""

    @pytest.mark.parametrize("q_path", ["plain", "dwt", "gabor", "fused"])
    def test_documented_parameter_counts(self, rng, q_path):
        module = FDFA(FdfaConfig(channels=8, q_path=q_path), rng)
        assert query_params(module) == query_param_count(q_path, 8)

    def test_counts_are_distinct(self):
        counts = {q: query_param_count(q, 8) for q in ("plain", "dwt", "gabor", "fused")}
        assert counts == {"plain": 72, "dwt": 72 + 80 + 72, "gabor": 75, "fused": 72 + 80 + 72 + 3}

    def test_fixed_wavelength_adds_nothing(self, rng):
        module = FDFA(FdfaConfig(channels=8, q_path="gabor", gabor_lambda="fixed:2"), rng)
        assert query_params(module) == query_param_count("gabor", 8, adaptive=False) == 72

    def test_conv_bands(self, rng):
        module = FDFA(FdfaConfig(channels=8, gabor_dirs="conv"), rng)
        assert query_params(module) == query_param_count("fused", 8, conv_bands=True)

    def test_unknown_query_path(self, rng):
        with pytest.raises(ShapeError):
            FDFA(FdfaConfig(channels=4, q_path="spectral"), rng)


class TestFlops:
    """Attention cost model."""

    def test_example(self):
        assert attention_flops(8, 64, 1) == 8192

    def test_quadratic_in_channels_linear_in_pixels(self):
        base = attention_flops(8, 256, 1)
        assert attention_flops(16, 256, 1) == 4 * base
        assert attention_flops(8, 512, 1) == 2 * base

    def test_heads_split_channels(self):
        assert attention_flops(8, 64, 2) == attention_flops(8, 64, 1) // 2

    @pytest.mark.parametrize("args", [(0, 64, 1), (8, 0, 1), (6, 64, 4)])
    def test_invalid_arguments(self, args):
        with pytest.raises(ShapeError):
            attention_flops(*args)
