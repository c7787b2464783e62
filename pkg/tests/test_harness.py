"""
Tests for the synthetic corpus, corruptions, manifests and batch iteration.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from dabformer.schemas.run_schema import CorruptionSpec, DatasetSpec
from dabformer.services.harness import (
    PairDataset,
    Prefetcher,
    SamplePair,
    corrupt,
    load_manifest_pairs,
    read_manifest,
    stack_batch,
    synth_corpus,
)
from dabformer.utils.exceptions import ConfigError, CoverageError, ImageFormatError
from dabformer.utils.image_io import write_image


@pytest.fixture
def clean():
    return synth_corpus(1, 32, "filtered_noise", seed=2)[0]


class TestCorpus:
    def test_shape_range_and_determinism(self):
        a = synth_corpus(5, 24, seed=3)
        assert a.shape == (5, 3, 24, 24)
        assert a.min() >= 0.0 and a.max() <= 1.0
        np.testing.assert_array_equal(a, synth_corpus(5, 24, seed=3))
        assert not np.array_equal(a, synth_corpus(5, 24, seed=4))

    def test_prefix_stable(self):
        np.testing.assert_array_equal(synth_corpus(2, 16, seed=1), synth_corpus(4, 16, seed=1)[:2])

    def test_unknown_generator(self):
        with pytest.raises(ConfigError):
            synth_corpus(1, 16, "fractal")


class TestCorruption:
    """Noise blocks and rain streaks."""

    @pytest.mark.parametrize("band", [(0.2, 0.3), (0.4, 0.5), (0.6, 0.7)])
    def test_noise_block_coverage_within_band(self, clean, band):
        for seed in range(5):
            pair = corrupt(clean, CorruptionSpec(coverage=band, seed=seed))
            assert band[0] <= pair.coverage <= band[1]

    @pytest.mark.parametrize("kind", ["noise_blocks", "rain_streaks"])
    def test_pixels_outside_mask_untouched(self, clean, kind):
        pair = corrupt(clean, CorruptionSpec(kind=kind, seed=4))
        np.testing.assert_array_equal(pair.corrupted[:, ~pair.mask], clean[:, ~pair.mask])
        assert pair.mask.any()

    def test_seeded(self, clean):
        spec = CorruptionSpec(seed=9)
        a, b = corrupt(clean, spec), corrupt(clean, spec)
        np.testing.assert_array_equal(a.corrupted, b.corrupted)
        np.testing.assert_array_equal(a.mask, b.mask)

    def test_rain_brightens_and_stays_in_range(self, clean):
        pair = corrupt(clean, CorruptionSpec(kind="rain_streaks", rain_density=0.05, seed=1))
        assert np.all(pair.corrupted[:, pair.mask] >= clean[:, pair.mask])
        assert pair.corrupted.max() <= 1.0

    def test_schema_rejects_unknown_kind(self):
        with pytest.raises(ValidationError, match="rain_streaks"):
            CorruptionSpec(kind="rain")

    def test_unknown_kind_raises(self, clean):
        spec = CorruptionSpec().model_copy(update={"kind": "snow"})
        with pytest.raises(ConfigError, match="snow"):
            corrupt(clean, spec)

    def test_zero_coverage(self, clean):
        assert not corrupt(clean, CorruptionSpec(coverage=(0.0, 0.0))).mask.any()

    def test_block_larger_than_image(self, clean):
        with pytest.raises(CoverageError):
            corrupt(clean, CorruptionSpec(block_size=(40, 50)))

    def test_band_without_pixel_count(self):
        with pytest.raises(CoverageError):
            corrupt(np.zeros((3, 4, 4)), CorruptionSpec(coverage=(0.3, 0.3), block_size=(1, 2)))

    def test_coverage_above_limit_rejected(self):
        with pytest.raises(ValueError):
            CorruptionSpec(coverage=(0.5, 0.95))


class TestManifest:
    """Manifest-backed image pairs."""

    @pytest.fixture
    def manifest(self, tmp_path, clean):
        pair = corrupt(clean, CorruptionSpec(seed=1))
        write_image(tmp_path / "images" / "bad.png", pair.corrupted)
        write_image(tmp_path / "images" / "good.png", pair.clean)
        path = tmp_path / "pairs.txt"
        path.write_text("# corrupted clean\nimages/bad.png images/good.png\n")
        return path

    def test_paths_relative_to_manifest(self, manifest):
        pairs = read_manifest(manifest)
        assert pairs == [(manifest.parent / "images" / "bad.png", manifest.parent / "images" / "good.png")]

    def test_pairs_and_derived_mask(self, manifest):
        (sample,) = load_manifest_pairs(manifest)
        assert sample.clean.shape == (3, 32, 32)
        np.testing.assert_array_equal(sample.mask, np.any(sample.corrupted != sample.clean, axis=0))

    def test_dataset_from_manifest(self, manifest):
        dataset = PairDataset(DatasetSpec(manifest=str(manifest)), CorruptionSpec())
        assert len(dataset) == 1
        assert dataset.pair(0, epoch=3) is dataset.pair(0)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("a.png b.png\nonly_one.png\n")
        with pytest.raises(ConfigError) as info:
            read_manifest(path)
        assert info.value.line == 2

    def test_empty_manifest(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("# nothing\n")
        with pytest.raises(ConfigError, match="no image pairs"):
            read_manifest(path)


class TestIteration:
    """Deterministic order, batching and prefetching."""

    @pytest.fixture
    def dataset(self):
        return PairDataset(DatasetSpec(n=5, size=16, seed=2), CorruptionSpec(coverage=(0.2, 0.3), seed=3))

    def test_order_is_seeded_permutation(self, dataset):
        assert sorted(dataset.order(0)) == list(range(5))
        np.testing.assert_array_equal(dataset.order(1), dataset.order(1))

    def test_corruption_depends_on_epoch(self, dataset):
        np.testing.assert_array_equal(dataset.pair(2, 0).corrupted, dataset.pair(2, 0).corrupted)
        assert not np.array_equal(dataset.pair(2, 0).mask, dataset.pair(2, 1).mask)

    def test_batches_cover_epoch(self, dataset):
        sizes = [len(b) for b in dataset.batches(0, 2)]
        assert sizes == [2, 2, 1]

    def test_stream_rolls_over_epochs(self, dataset):
        stream = dataset.stream(batch_size=2)
        epochs = [next(stream)[0] for _ in range(4)]
        assert epochs == [0, 0, 0, 1]

    def test_stack_batch(self, dataset):
        corrupted, clean, masks = stack_batch(next(dataset.batches(0, 2)))
        assert corrupted.shape == clean.shape == (2, 3, 16, 16)
        assert masks.shape == (2, 16, 16)

    def test_stack_batch_size_mismatch(self):
        pairs = [SamplePair(np.zeros((3, s, s)), np.zeros((3, s, s)), np.zeros((s, s), bool)) for s in (16, 32)]
        with pytest.raises(ImageFormatError):
            stack_batch(pairs)

    @pytest.mark.parametrize("depth", [0, 1, 3])
    def test_prefetcher_preserves_order(self, depth):
        prefetcher = Prefetcher(iter(range(20)), depth=depth)
        try:
            assert list(prefetcher) == list(range(20))
        finally:
            prefetcher.close()

    def test_prefetcher_propagates_errors(self):
        def source():
            yield 1
            raise RuntimeError("boom")

        prefetcher = Prefetcher(source(), depth=2)
        assert next(prefetcher) == 1
        with pytest.raises(RuntimeError, match="boom"):
            next(prefetcher)
        prefetcher.close()
