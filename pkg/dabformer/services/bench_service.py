"""
Benchmark Service

This service times the FDFA forward pass over a grid of channel counts and
spatial sizes and fits log-log slopes, showing that the cost grows with C
squared and only linearly with the pixel count M. The bare attention product
is timed alongside and is the only measurement with ``forward=False``.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Union

import numpy as np
from scipy.special import softmax

from dabformer.core.fdfa import FDFA, FdfaConfig, attention_flops
from dabformer.core.tensor import Tensor, no_grad
from dabformer.utils.constants import BENCH_CSV
from dabformer.utils.helpers import ensure_dir, loglog_slope, write_csv

logger = logging.getLogger(__name__)

BENCH_FIELDS = ["sweep", "channels", "pixels", "heads", "flops", "core_seconds", "forward_seconds"]

CHANNEL_GRID = (8, 16, 32, 64)
PIXEL_GRID = (256, 1024, 4096)


def attention_core(q: np.ndarray, k: np.ndarray, v: np.ndarray, temperature: np.ndarray) -> np.ndarray:
    """
    softmax(Q K^T / t) V on ``[h, C/h, M]`` arrays.

    The contractions are unoptimised einsums so the running time follows the
    multiply count rather than BLAS blocking effects.
    """
    scores = np.einsum("hdm,hem->hde", q, k, optimize=False) / temperature
    return np.einsum("hde,hem->hdm", softmax(scores, axis=-1), v, optimize=False)


def best_time(fn: Callable[[], object], repeats: int) -> float:
    """Fastest of ``repeats`` wall-clock runs"""
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def square_side(pixels: int) -> int:
    side = math.isqrt(pixels)
    if side * side != pixels or side % 2:
        raise ValueError(f"pixel count {pixels} is not an even square")
    return side


@dataclass
class BenchReport:
    """Timings plus fitted exponents; ``timed`` names the measurement behind the main slopes"""

    rows: List[Dict[str, float]]
    timed: str
    channel_slope: float
    pixel_slope: float
    core_channel_slope: float
    core_pixel_slope: float
    path: Path = field(default=None)

    def summary(self) -> str:
        return (
            f"{self.timed}: time ~ C^{self.channel_slope:.2f}, time ~ M^{self.pixel_slope:.2f} "
            f"(attention core C^{self.core_channel_slope:.2f}, M^{self.core_pixel_slope:.2f})"
        )


class BenchService:
    """Service for the attention scaling benchmark"""

    def __init__(
        self,
        output_dir: Union[str, Path],
        channels: Sequence[int] = CHANNEL_GRID,
        pixels: Sequence[int] = PIXEL_GRID,
        fixed_pixels: int = 128 * 128,
        fixed_channels: int = 32,
        heads: int = 1,
        repeats: int = 3,
        forward: bool = True,
        seed: int = 0,
    ):
        """
        Initialize the benchmark.

        Args:
            output_dir: Directory receiving ``bench.csv``
            channels: Channel counts swept at ``fixed_pixels``
            pixels: Pixel counts (even squares) swept at ``fixed_channels``
            heads: Attention heads; each head holds C/h channels
            repeats: Timed runs per point, the fastest is kept
            forward: Time the FDFA forward pass; when False only the attention core is timed
            seed: Seed for weights and inputs
        """
        self.output_dir = ensure_dir(output_dir)
        self.channels = list(channels)
        self.pixels = list(pixels)
        self.fixed_pixels = fixed_pixels
        self.fixed_channels = fixed_channels
        self.heads = heads
        self.repeats = repeats
        self.forward = forward
        self.seed = seed

    def measure(self, sweep: str, channels: int, pixels: int) -> Dict[str, float]:
        rng = np.random.default_rng([self.seed, channels, pixels])
        side = square_side(pixels)
        head_dim = channels // self.heads
        q, k, v = (rng.standard_normal((self.heads, head_dim, pixels)) for _ in range(3))
        temperature = np.full((self.heads, 1, 1), math.sqrt(head_dim))
        core = best_time(lambda: attention_core(q, k, v, temperature), self.repeats)

        forward = math.nan
        if self.forward:
            module = FDFA(FdfaConfig(channels=channels, heads=self.heads), rng)
            x = Tensor(rng.standard_normal((1, channels, side, side)))

            def run() -> None:
                with no_grad():
                    module(x)

            forward = best_time(run, self.repeats)

        row = {
            "sweep": sweep,
            "channels": channels,
            "pixels": pixels,
            "heads": self.heads,
            "flops": attention_flops(channels, pixels, self.heads),
            "core_seconds": core,
            "forward_seconds": forward,
        }
        logger.info(f"{sweep:8s} C={channels:3d} M={pixels:6d} core {core:.4f}s forward {forward:.4f}s")
        return row

    def run(self) -> BenchReport:
        """
        Time both sweeps, fit the slopes and write ``bench.csv``.

        Returns:
            BenchReport with the rows and fitted exponents
        """
        by_channels = [self.measure("channels", c, self.fixed_pixels) for c in self.channels]
        by_pixels = [self.measure("pixels", self.fixed_channels, m) for m in self.pixels]

        def slope(rows: List[Dict[str, float]], x: str, y: str) -> float:
            if any(math.isnan(r[y]) for r in rows):
                return math.nan
            return loglog_slope([r[x] for r in rows], [r[y] for r in rows])

        timed = "forward_seconds" if self.forward else "core_seconds"
        report = BenchReport(
            rows=by_channels + by_pixels,
            timed="fdfa forward" if self.forward else "attention core",
            channel_slope=slope(by_channels, "channels", timed),
            pixel_slope=slope(by_pixels, "pixels", timed),
            core_channel_slope=slope(by_channels, "channels", "core_seconds"),
            core_pixel_slope=slope(by_pixels, "pixels", "core_seconds"),
        )
        report.path = write_csv(self.output_dir / BENCH_CSV, BENCH_FIELDS, report.rows)
        logger.info(report.summary())
        return report
