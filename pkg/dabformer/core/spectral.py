"""
Spectral Transforms

Single-level orthonormal Haar DWT and real-input 2D FFT, both differentiable,
plus the per-bin complex product used as a learnable frequency filter.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from dabformer.core import ops
from dabformer.core.tensor import Tensor, make_result
from dabformer.utils.exceptions import ShapeError

logger = logging.getLogger(__name__)


@dataclass
class Subbands:
    """(LL, HL, LH, HH) maps of one DWT level, all of identical shape"""

    ll: Tensor
    hl: Tensor
    lh: Tensor
    hh: Tensor

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        shapes = {t.shape for t in self}
        if len(shapes) != 1:
            raise ShapeError("subband shapes differ", details=str(sorted(shapes)))

    def __iter__(self) -> Iterator[Tensor]:
        return iter((self.ll, self.hl, self.lh, self.hh))

    def __add__(self, other: "Subbands") -> "Subbands":
        return Subbands(*(a + b for a, b in zip(self, other)))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.ll.shape

    def energy(self) -> float:
        return float(sum(np.sum(t.data * t.data) for t in self))


@dataclass
class ComplexMap:
    """Real and imaginary parts of a half-spectrum (last axis W/2 + 1)"""

    real: Tensor
    imag: Tensor

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise ShapeError("real and imaginary parts differ in shape", details=f"{self.real.shape} vs {self.imag.shape}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.real.shape

    def to_numpy(self) -> np.ndarray:
        return self.real.data + 1j * self.imag.data


# ------------------------------------------------------------------------ DWT
def dwt2(x: Tensor) -> Subbands:
    """
    Orthonormal single-level Haar analysis over the last two axes.

    For each 2x2 block with pixels a=(0,0), b=(1,0), c=(0,1), d=(1,1):
    ll=(a+b+c+d)/2, hl=(a-b+c-d)/2, lh=(a+b-c-d)/2, hh=(a-b-c+d)/2.
    HL therefore carries the row difference (horizontal structures) and LH the
    column difference (vertical structures).
    """
    if x.ndim < 2:
        raise ShapeError("dwt2 needs at least two axes", details=f"shape={x.shape}")
    height, width = x.shape[-2:]
    if height % 2 or width % 2:
        raise ShapeError(f"dwt2 needs even extents, got H={height} W={width}")
    a = x[..., 0::2, 0::2]
    b = x[..., 1::2, 0::2]
    c = x[..., 0::2, 1::2]
    d = x[..., 1::2, 1::2]
    return Subbands(
        ll=(a + b + c + d) * 0.5,
        hl=(a - b + c - d) * 0.5,
        lh=(a + b - c - d) * 0.5,
        hh=(a - b - c + d) * 0.5,
    )


def idwt2(s: Subbands) -> Tensor:
    """Exact inverse of ``dwt2``"""
    s.validate()
    a = (s.ll + s.hl + s.lh + s.hh) * 0.5
    b = (s.ll - s.hl + s.lh - s.hh) * 0.5
    c = (s.ll + s.hl - s.lh - s.hh) * 0.5
    d = (s.ll - s.hl - s.lh + s.hh) * 0.5
    top = ops.stack([a, c], axis=-1)
    bottom = ops.stack([b, d], axis=-1)
    blocks = ops.stack([top, bottom], axis=-3)
    *lead, h, _, w, _ = blocks.shape
    return blocks.reshape(*lead, 2 * h, 2 * w)


# ------------------------------------------------------------------------ FFT
def rfft2(x: Tensor) -> ComplexMap:
    """Unnormalised real-input 2D DFT over the last two axes (half spectrum)"""
    if x.ndim < 2:
        raise ShapeError("rfft2 needs at least two axes", details=f"shape={x.shape}")
    height, width = x.shape[-2:]
    spectrum = np.fft.rfft2(x.data, axes=(-2, -1))
    packed = np.stack([spectrum.real, spectrum.imag])

    def backward(g):
        full = np.zeros(x.shape, dtype=np.complex128)
        full[..., : spectrum.shape[-1]] = g[0] + 1j * g[1]
        return (np.real(np.fft.ifft2(full, axes=(-2, -1))) * (height * width),)

    parts = make_result(packed, (x,), backward, "rfft2")
    return ComplexMap(real=parts[0], imag=parts[1])


def irfft2(f: ComplexMap, height: int, width: int) -> Tensor:
    """Inverse of ``rfft2`` with 1/(H*W) normalisation; output is real by construction"""
    if f.shape[-2] != height or f.shape[-1] != width // 2 + 1:
        raise ShapeError(f"half spectrum {f.shape[-2:]} does not match output {height}x{width}")
    packed = ops.stack([f.real, f.imag], axis=0)
    out = np.fft.irfft2(packed.data[0] + 1j * packed.data[1], s=(height, width), axes=(-2, -1))

    def backward(g):
        spectrum = np.fft.rfft2(g, axes=(-2, -1)) / (height * width)
        spectrum[..., 1 : (width + 1) // 2] *= 2.0
        return (np.stack([spectrum.real, spectrum.imag]),)

    return make_result(out, (packed,), backward, "irfft2")


def complex_pointwise_filter(f: ComplexMap, w: ComplexMap) -> ComplexMap:
    """Per-bin complex product (a+bi)(c+di), broadcasting the filter over leading axes"""
    try:
        np.broadcast_shapes(f.shape, w.shape)
    except ValueError as e:
        raise ShapeError("filter not broadcastable over feature spectrum", details=f"{w.shape} vs {f.shape}") from e
    real = f.real * w.real - f.imag * w.imag
    imag = f.real * w.imag + f.imag * w.real
    return ComplexMap(real=real, imag=imag)
