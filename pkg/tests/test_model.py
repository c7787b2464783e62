"""
Tests for the block and the full encoder/decoder model.
"""

import logging

import numpy as np
import pytest
from pydantic import ValidationError

from dabformer.core.block import DabformerBlock
from dabformer.core.fdagn import FdagnConfig, FreqFilter
from dabformer.core.fdfa import FdfaConfig
from dabformer.core.model import Dabformer, Downsample, Upsample
from dabformer.core.tensor import Tensor, no_grad
from dabformer.schemas.model_schema import ModelConfig
from dabformer.utils.exceptions import ShapeError


def zero_reconstruction(model: Dabformer) -> Dabformer:
    model.reconstruct.weight.data[...] = 0.0
    model.reconstruct.bias.data[...] = 0.0
    return model


class TestBlock:
    def test_residual_composition(self, rng):
        block = DabformerBlock(FdfaConfig(channels=4, heads=2), FdagnConfig(channels=4, pad_to_patch=True), rng)
        x = Tensor(rng.standard_normal((1, 4, 8, 8)))
        with no_grad():
            out = block(x).data
            mid = x + block.attention_term(x)
            expected = (mid + block.feed_forward_term(mid)).data
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_zeroed_branches_give_identity(self, rng):
        block = DabformerBlock(FdfaConfig(channels=4, heads=2), FdagnConfig(channels=4, pad_to_patch=True), rng)
        for conv in (block.attn.out_proj, block.ffn.project):
            conv.weight.data[...] = 0.0
            conv.bias.data[...] = 0.0
        x = Tensor(rng.standard_normal((1, 4, 8, 8)))
        with no_grad():
            np.testing.assert_array_equal(block(x).data, x.data)

    def test_resampling_shapes(self, rng):
        x = Tensor(rng.standard_normal((2, 4, 8, 6)))
        with no_grad():
            down = Downsample(4, rng)(x)
            up = Upsample(8, rng)(down)
        assert down.shape == (2, 8, 4, 3)
        assert up.shape == (2, 4, 8, 6)


class TestDabformer:
    """Shape handling, determinism and reports of the full network."""

    @pytest.mark.parametrize("height,width", [(17, 20), (70, 45)])
    def test_arbitrary_extents(self, tiny_model_config, rng, height, width):
        model = Dabformer(tiny_model_config)
        with no_grad():
            out = model(Tensor(rng.uniform(size=(1, 3, height, width))))
        assert out.shape == (1, 3, height, width)

    def test_level_shapes_follow_padding(self, tiny_model_config, rng):
        model = Dabformer(tiny_model_config)
        with no_grad():
            model(Tensor(rng.uniform(size=(1, 3, 17, 20))))
        assert [s[1:] for s in model.level_shapes] == [(4, 32, 32), (8, 16, 16), (16, 8, 8), (32, 4, 4)]

    def test_zero_reconstruction_is_identity(self, tiny_model_config, rng):
        model = zero_reconstruction(Dabformer(tiny_model_config))
        image = rng.uniform(size=(2, 3, 16, 24))
        with no_grad():
            np.testing.assert_array_equal(model(Tensor(image)).data, image)

    def test_seed_determinism(self, tiny_model_config):
        a = Dabformer(tiny_model_config, seed=7).param_store()
        b = Dabformer(tiny_model_config, seed=7).param_store()
        c = Dabformer(tiny_model_config, seed=8).param_store()
        assert list(a) == list(b)
        assert all(np.array_equal(a[k].data, b[k].data) for k in a)
        assert not all(np.array_equal(a[k].data, c[k].data) for k in a)

    def test_forward_is_deterministic(self, tiny_model_config, rng):
        model = Dabformer(tiny_model_config)
        image = Tensor(rng.uniform(size=(1, 3, 16, 16)))
        with no_grad():
            np.testing.assert_array_equal(model(image).data, model(image).data)

    @pytest.mark.parametrize("shape", [(1, 3, 15, 32), (1, 3, 32, 8)])
    def test_too_small(self, tiny_model_config, shape):
        with pytest.raises(ShapeError, match="16 pixels"):
            Dabformer(tiny_model_config)(Tensor(np.zeros(shape)))

    def test_wrong_channels(self, tiny_model_config):
        with pytest.raises(ShapeError):
            Dabformer(tiny_model_config)(Tensor(np.zeros((1, 1, 16, 16))))

    def test_summary_totals(self, tiny_model_config):
        model = Dabformer(tiny_model_config)
        rows = dict(model.summary())
        children = sum(count for name, count in rows.items() if name not in ("frequency filters", "total"))
        assert children == rows["total"] == model.num_parameters()
        # one block per encoder level plus one per decoder level
        widths = (4, 8, 16, 32) + (4, 8, 16)
        expected_filters = sum(FreqFilter.count(FdagnConfig(channels=c).hidden, 8) for c in widths)
        assert rows["frequency filters"] == expected_filters
        assert "reference" in model.summary_table()

    def test_plain_ffn_has_no_filters(self):
        model = Dabformer(ModelConfig(base_channels=4, blocks=[1, 1], heads=[1, 1], ffn="ffn"))
        assert model.frequency_filter_params() == 0

    def test_patch_padding_levels(self, tiny_model_config):
        model = Dabformer(tiny_model_config)
        assert model.patch_padding(16, 16) == [(2, (4, 4)), (3, (2, 2))]
        assert model.patch_padding(17, 20) == [(3, (4, 4))]
        assert Dabformer(tiny_model_config.model_copy(update={"ffn": "ffn"})).patch_padding(16, 16) == []

    def test_patch_padding_logged_once_per_extent(self, tiny_model_config, rng, caplog):
        caplog.set_level(logging.INFO, logger="dabformer.core.model")
        model = Dabformer(tiny_model_config)
        image = Tensor(rng.uniform(size=(1, 3, 16, 16)))
        with no_grad():
            model(image)
            model(image)
        messages = [r.getMessage() for r in caplog.records if "zero-pads" in r.getMessage()]
        assert messages == ["Frequency stage zero-pads to P=8 at L2 4x4, L3 2x2"]


class TestModelConfig:
    def test_heads_must_divide_width(self):
        with pytest.raises(ValidationError, match="divisible"):
            ModelConfig(base_channels=4, blocks=[1, 1], heads=[1, 3])

    def test_pad_multiple_must_cover_levels(self):
        with pytest.raises(ValidationError, match="pad_multiple"):
            ModelConfig(base_channels=4, blocks=[1, 1, 1, 1, 1], heads=[1, 1, 1, 1, 1])

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ValidationError):
            ModelConfig(gabor_dirs="sideways")

    def test_hash_tracks_architecture(self):
        assert ModelConfig().config_hash() == ModelConfig().config_hash()
        assert ModelConfig().config_hash() != ModelConfig(q_path="plain").config_hash()
