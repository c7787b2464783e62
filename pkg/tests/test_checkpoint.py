"""
Tests for checkpoint files and image I/O.
"""

import numpy as np
import pytest

from dabformer.core.model import Dabformer
from dabformer.core.tensor import Tensor, no_grad
from dabformer.schemas.model_schema import ModelConfig
from dabformer.services.eval_service import load_model
from dabformer.utils.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from dabformer.utils.exceptions import CheckpointError, ImageFormatError, ShapeError
from dabformer.utils.image_io import from_uint8, read_image, to_uint8, write_image, write_panel


@pytest.fixture
def small_config():
    return ModelConfig(base_channels=4, blocks=[1, 1], heads=[1, 2])


class TestCheckpoint:
    """Binary checkpoint layout and validation."""

    def test_model_roundtrip(self, tmp_path, small_config):
        model = Dabformer(small_config, seed=3)
        path = save_checkpoint(tmp_path / "model.dabf", small_config, model.state_store())
        checkpoint = load_checkpoint(path, expected=small_config)
        assert checkpoint.model_config() == small_config

        restored = Dabformer(checkpoint.model_config(), seed=99)
        restored.load_state_store(checkpoint.params())
        for name, param in model.param_store().items():
            np.testing.assert_array_equal(restored.param_store()[name].data, param.data)

    def test_random_directions_survive_reload(self, tmp_path, rng):
        config = ModelConfig(base_channels=4, blocks=[1, 1, 1, 1], gabor_dirs="random")
        model = Dabformer(config, seed=7)
        path = save_checkpoint(tmp_path / "random.dabf", config, model.state_store())
        restored = load_model(path)

        original = dict(model.named_buffers())
        assert original
        for name, buffer in restored.named_buffers():
            np.testing.assert_array_equal(buffer.data, original[name].data)
        image = Tensor(rng.uniform(size=(1, 3, 16, 16)))
        with no_grad():
            np.testing.assert_array_equal(restored(image).data, model(image).data)

    def test_missing_buffers_rejected(self, tmp_path, small_config):
        path = save_checkpoint(tmp_path / "params.dabf", small_config, Dabformer(small_config).param_store())
        with pytest.raises(ShapeError, match="buffer names"):
            load_model(path)

    def test_extras_are_separated(self, small_config):
        tensors = {"w": np.ones((2, 2)), "optim.step": np.array([4.0]), "train.rng": np.zeros(3)}
        checkpoint = decode_checkpoint(encode_checkpoint(small_config, tensors))
        assert list(checkpoint.params()) == ["w"]
        assert set(checkpoint.extras()) == {"optim.step", "train.rng"}

    def test_header_layout(self, small_config):
        payload = encode_checkpoint(small_config, {})
        assert payload[:4] == b"DABF"
        assert int.from_bytes(payload[4:8], "little") == 1
        assert payload[8:40] == small_config.config_hash()

    def test_hash_mismatch(self, tmp_path, small_config):
        path = save_checkpoint(tmp_path / "model.dabf", small_config, {})
        with pytest.raises(CheckpointError, match="different model configuration"):
            load_checkpoint(path, expected=small_config.model_copy(update={"q_path": "plain"}))

    def test_tampered_config_rejected(self, small_config):
        payload = encode_checkpoint(small_config, {})
        assert b'"base_channels":4' in payload
        tampered = payload.replace(b'"base_channels":4', b'"base_channels":8')
        with pytest.raises(CheckpointError, match="stored hash"):
            decode_checkpoint(tampered)

    def test_invalid_config_rejected(self, small_config):
        payload = encode_checkpoint(small_config, {}).replace(b'"q_path":"fused"', b'"q_path":"fuzed"')
        with pytest.raises(CheckpointError, match="invalid"):
            decode_checkpoint(payload)

    def test_bad_magic(self, small_config):
        payload = b"NOPE" + encode_checkpoint(small_config, {})[4:]
        with pytest.raises(CheckpointError, match="bad magic"):
            decode_checkpoint(payload)

    def test_truncated(self, small_config):
        payload = encode_checkpoint(small_config, {"w": np.arange(6.0)})
        with pytest.raises(CheckpointError, match="truncated"):
            decode_checkpoint(payload[:-5])

    def test_trailing_bytes(self, small_config):
        with pytest.raises(CheckpointError, match="trailing"):
            decode_checkpoint(encode_checkpoint(small_config, {}) + b"\x00")

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "absent.dabf")

    def test_exit_code(self):
        assert CheckpointError().exit_code == 5


class TestImageIO:
    """PNG / PPM reading and writing."""

    @pytest.mark.parametrize("suffix", [".png", ".ppm"])
    def test_write_then_read_is_quantised(self, tmp_path, rng, suffix):
        image = rng.uniform(size=(3, 5, 7))
        path = write_image(tmp_path / f"image{suffix}", image)
        np.testing.assert_allclose(read_image(path), from_uint8(to_uint8(image)), atol=0.0)

    def test_rounds_halves_up(self):
        pixels = to_uint8(np.full((3, 1, 1), 0.5 / 255.0))
        assert pixels.shape == (1, 1, 3)
        assert pixels[0, 0, 0] == 1

    def test_clips_out_of_range(self):
        pixels = to_uint8(np.array([-0.5, 0.2, 1.5]).reshape(3, 1, 1))
        assert pixels[0, 0].tolist() == [0, 51, 255]

    def test_grayscale_expanded(self):
        image = from_uint8(np.full((2, 2), 255, dtype=np.uint8))
        assert image.shape == (3, 2, 2)
        np.testing.assert_array_equal(image, 1.0)

    def test_unsupported_extension(self, tmp_path):
        with pytest.raises(ImageFormatError, match="unsupported"):
            write_image(tmp_path / "image.jpg", np.zeros((3, 2, 2)))

    def test_bad_shape(self, tmp_path):
        with pytest.raises(ImageFormatError):
            write_image(tmp_path / "image.png", np.zeros((2, 2)))

    def test_undecodable_file(self, tmp_path):
        path = tmp_path / "broken.png"
        path.write_bytes(b"not an image")
        with pytest.raises(ImageFormatError, match="decode"):
            read_image(path)

    def test_panel_width(self, tmp_path, rng):
        images = [rng.uniform(size=(3, 4, 5)) for _ in range(3)]
        panel = read_image(write_panel(tmp_path / "panel.png", images))
        assert panel.shape == (3, 4, 5 * 3 + 2 * 2)
