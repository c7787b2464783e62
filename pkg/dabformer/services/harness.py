"""
Data Harness

Synthetic clean corpora, synthetic corruptions (noise blocks, rain streaks),
manifest-backed image pairs and deterministic batch iteration with an optional
prefetch thread.
"""

import logging
import math
import queue
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from dabformer.schemas.run_schema import CorruptionSpec, DatasetSpec
from dabformer.utils.exceptions import ConfigError, CoverageError, ImageFormatError
from dabformer.utils.image_io import read_image

logger = logging.getLogger(__name__)

MAX_PLACEMENTS = 100000


@dataclass
class SamplePair:
    """Clean / corrupted images [3, H, W] and the corruption mask [H, W]"""

    clean: np.ndarray
    corrupted: np.ndarray
    mask: np.ndarray

    @property
    def coverage(self) -> float:
        return float(self.mask.mean())


# ------------------------------------------------------------------ corruption
def _noise_block_mask(height: int, width: int, spec: CorruptionSpec, rng: np.random.Generator) -> np.ndarray:
    low, high = spec.coverage
    total = height * width
    mask = np.zeros((height, width), dtype=bool)
    if high == 0.0:
        return mask
    min_side, max_side = spec.block_size
    if min_side > min(height, width):
        raise CoverageError(f"block size {min_side} exceeds image {height}x{width}")
    floor_count = math.ceil(low * total)
    ceil_count = math.floor(high * total)
    if floor_count > ceil_count:
        raise CoverageError(f"coverage band {spec.coverage} has no pixel count on a {height}x{width} image")
    target = int(rng.integers(floor_count, ceil_count + 1))
    count = 0
    for _ in range(MAX_PLACEMENTS):
        if count >= target:
            return mask
        h = int(rng.integers(min_side, min(max_side, height) + 1))
        w = int(rng.integers(min_side, min(max_side, width) + 1))
        top = int(rng.integers(0, height - h + 1))
        left = int(rng.integers(0, width - w + 1))
        while True:
            added = h * w - int(mask[top : top + h, left : left + w].sum())
            if count + added <= ceil_count:
                break
            # shrink the longer side until the block fits the coverage ceiling
            if h >= w:
                h -= 1
            else:
                w -= 1
        mask[top : top + h, left : left + w] = True
        count += added
    raise CoverageError(f"coverage {spec.coverage} not reached after {MAX_PLACEMENTS} placements")


def _rain_streaks(
    clean: np.ndarray, spec: CorruptionSpec, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    _, height, width = clean.shape
    corrupted = clean.copy()
    mask = np.zeros((height, width), dtype=bool)
    streaks = int(round(spec.rain_density * height * width))
    for _ in range(streaks):
        angle = math.radians(spec.rain_angle_deg + rng.uniform(-spec.rain_angle_jitter_deg, spec.rain_angle_jitter_deg))
        length = int(rng.integers(spec.rain_length[0], spec.rain_length[1] + 1))
        intensity = rng.uniform(*spec.rain_intensity)
        y0, x0 = rng.uniform(0, height), rng.uniform(0, width)
        steps = np.arange(0.0, length, 0.5)
        ys = np.floor(y0 + steps * math.sin(angle)).astype(int)
        xs = np.floor(x0 + steps * math.cos(angle)).astype(int)
        keep = (ys >= 0) & (ys < height) & (xs >= 0) & (xs < width)
        ys, xs = ys[keep], xs[keep]
        if ys.size == 0:
            continue
        pixels = np.unique(ys * width + xs)
        ys, xs = pixels // width, pixels % width
        corrupted[:, ys, xs] = np.minimum(corrupted[:, ys, xs] + intensity, 1.0)
        mask[ys, xs] = True
    return corrupted, mask


def corrupt(clean: np.ndarray, spec: CorruptionSpec, rng: Optional[np.random.Generator] = None) -> SamplePair:
    """
    Apply a synthetic degradation.

    Pixels outside the returned mask are bit-identical to ``clean``.

    Args:
        clean: Image [3, H, W] in [0, 1]
        spec: Corruption parameters
        rng: Random source; defaults to one seeded with ``spec.seed``
    """
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    clean = np.asarray(clean, dtype=np.float64)
    _, height, width = clean.shape
    if spec.kind == "noise_blocks":
        mask = _noise_block_mask(height, width, spec, rng)
        corrupted = clean.copy()
        corrupted[:, mask] = rng.uniform(0.0, 1.0, size=(clean.shape[0], int(mask.sum())))
    elif spec.kind == "rain_streaks":
        corrupted, mask = _rain_streaks(clean, spec, rng)
    else:
        raise ConfigError(f"unknown corruption kind {spec.kind!r}")
    return SamplePair(clean=clean, corrupted=corrupted, mask=mask)


# ---------------------------------------------------------------------- corpus
def _normalise(image: np.ndarray) -> np.ndarray:
    lo, hi = image.min(), image.max()
    if hi - lo < 1e-12:
        return np.full_like(image, 0.5)
    return (image - lo) / (hi - lo)


def gradient_image(size: int, rng: np.random.Generator) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    channels = []
    for _ in range(3):
        theta = rng.uniform(0.0, 2.0 * math.pi)
        ramp = xs * math.cos(theta) + ys * math.sin(theta)
        lo, hi = np.sort(rng.uniform(0.0, 1.0, size=2))
        channels.append(lo + (hi - lo) * _normalise(ramp))
    return np.stack(channels)


def checkerboard_image(size: int, rng: np.random.Generator) -> np.ndarray:
    cell = int(rng.choice([4, 8]))
    ys, xs = np.mgrid[0:size, 0:size]
    parity = ((ys // cell + xs // cell) % 2).astype(bool)
    a, b = rng.uniform(0.0, 1.0, size=(2, 3))
    return np.where(parity[None], b[:, None, None], a[:, None, None])


def filtered_noise_image(size: int, rng: np.random.Generator) -> np.ndarray:
    """Anisotropically smoothed noise: directional texture"""
    sigma = (rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5))
    return np.stack([_normalise(gaussian_filter(rng.uniform(size=(size, size)), sigma)) for _ in range(3)])


GENERATOR_FUNCTIONS = {
    "gradients": gradient_image,
    "checkerboards": checkerboard_image,
    "filtered_noise": filtered_noise_image,
}


def synth_corpus(n: int, size: int, generator: str = "mixed", seed: int = 0) -> np.ndarray:
    """
    Deterministic clean corpus [n, 3, size, size].

    ``mixed`` cycles gradients, checkerboards and filtered noise.
    """
    if n < 1:
        raise ConfigError(f"corpus size must be >= 1, got {n}")
    names = list(GENERATOR_FUNCTIONS) if generator == "mixed" else [generator]
    if any(name not in GENERATOR_FUNCTIONS for name in names):
        raise ConfigError(f"unknown generator {generator!r}")
    images = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        images.append(GENERATOR_FUNCTIONS[names[i % len(names)]](size, rng))
    return np.stack(images)


# -------------------------------------------------------------------- manifest
def read_manifest(path: Union[str, Path]) -> List[Tuple[Path, Path]]:
    """``corrupted_path clean_path`` per line; ``#`` comments; paths relative to the manifest"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    pairs = []
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        fields = body.split()
        if len(fields) != 2:
            raise ConfigError(f"expected 'corrupted_path clean_path', got {body!r}", line=number)
        pairs.append(tuple(p if Path(p).is_absolute() else path.parent / p for p in map(Path, fields)))
    if not pairs:
        raise ConfigError(f"manifest {path} lists no image pairs")
    return pairs


def load_manifest_pairs(path: Union[str, Path]) -> List[SamplePair]:
    samples = []
    for corrupted_path, clean_path in read_manifest(path):
        corrupted, clean = read_image(corrupted_path), read_image(clean_path)
        if corrupted.shape != clean.shape:
            raise ImageFormatError(f"pair shapes differ: {corrupted_path.name} {corrupted.shape} vs {clean.shape}")
        samples.append(SamplePair(clean, corrupted, np.any(corrupted != clean, axis=0)))
    logger.info(f"Loaded {len(samples)} pairs from manifest {path}")
    return samples


# --------------------------------------------------------------------- dataset
class PairDataset:
    """
    Image pairs with deterministic, epoch-dependent corruption and order.

    Synthetic corpora are corrupted on the fly with an RNG seeded by
    (corruption seed, epoch, index); manifest pairs are used as stored.
    """

    def __init__(self, spec: DatasetSpec, corruption: CorruptionSpec):
        self.spec = spec
        self.corruption = corruption
        if spec.manifest:
            self.fixed: Optional[List[SamplePair]] = load_manifest_pairs(spec.manifest)
            self.clean = None
        else:
            self.fixed = None
            self.clean = synth_corpus(spec.n, spec.size, spec.generator, spec.seed)

    def __len__(self) -> int:
        return len(self.fixed) if self.fixed is not None else len(self.clean)

    def pair(self, index: int, epoch: int = 0) -> SamplePair:
        if self.fixed is not None:
            return self.fixed[index]
        rng = np.random.default_rng([self.corruption.seed, epoch, index])
        return corrupt(self.clean[index], self.corruption, rng)

    def order(self, epoch: int) -> np.ndarray:
        return np.random.default_rng([self.spec.seed, epoch]).permutation(len(self))

    def batches(self, epoch: int, batch_size: int) -> Iterator[List[SamplePair]]:
        order = self.order(epoch)
        for start in range(0, len(order), batch_size):
            yield [self.pair(int(i), epoch) for i in order[start : start + batch_size]]

    def stream(self, batch_size: int, start_epoch: int = 0) -> Iterator[Tuple[int, List[SamplePair]]]:
        """Endless (epoch, batch) sequence"""
        epoch = start_epoch
        while True:
            for batch in self.batches(epoch, batch_size):
                yield epoch, batch
            epoch += 1


def stack_batch(batch: Sequence[SamplePair]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(corrupted [B,3,H,W], clean [B,3,H,W], masks [B,H,W])"""
    shapes = {p.clean.shape for p in batch}
    if len(shapes) != 1:
        raise ImageFormatError("batch images differ in size", details=str(sorted(shapes)))
    return (
        np.stack([p.corrupted for p in batch]),
        np.stack([p.clean for p in batch]),
        np.stack([p.mask for p in batch]),
    )


class Prefetcher:
    """
    Runs an iterator on a worker thread, feeding a bounded queue.

    Items come out in the order the iterator produces them.
    """

    _DONE = object()

    def __init__(self, source: Iterator, depth: int = 2):
        self.source = source
        self.depth = depth
        self._queue: "queue.Queue" = queue.Queue(maxsize=max(depth, 1))
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        if depth > 0:
            self._thread = threading.Thread(target=self._run, name="dabformer-prefetch", daemon=True)
            self._thread.start()

    def _run(self) -> None:
        try:
            for item in self.source:
                while not self._stop.is_set():
                    try:
                        self._queue.put(item, timeout=0.1)
                        break
                    except queue.Full:
                        continue
                if self._stop.is_set():
                    return
        except Exception as e:
            self._queue.put(e)
            return
        self._queue.put(self._DONE)

    def __iter__(self):
        return self

    def __next__(self):
        if self._thread is None:
            return next(self.source)
        item = self._queue.get()
        if item is self._DONE:
            raise StopIteration
        if isinstance(item, Exception):
            raise item
        return item

    def close(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=1.0)
