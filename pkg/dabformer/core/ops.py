"""
Tensor Operations

Convolution, normalisation, activations and layout operations on top of the
core tensor. Each operation validates its operands, computes the forward pass
with numpy and registers an analytic backward.
"""

import math
from typing import List, Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from dabformer.core.tensor import Tensor, as_tensor, make_result
from dabformer.utils.exceptions import ShapeError

_SQRT_2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _require_rank(x: Tensor, rank: int, what: str) -> None:
    if x.ndim != rank:
        raise ShapeError(f"{what} must have rank {rank}", details=f"got shape {x.shape}")


# ----------------------------------------------------------------- convolution
def conv2d(
    x: Tensor,
    w: Tensor,
    b: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """
    2D cross-correlation with zero padding.

    Args:
        x: Input [B, Cin, H, W]
        w: Kernel [Cout, Cin/groups, Kh, Kw]; Kh and Kw odd
        b: Optional bias [Cout]
        stride: Spatial stride
        padding: Zero padding on every side
        groups: Channel groups (groups == Cin is depthwise)

    Returns:
        Output [B, Cout, (H + 2p - Kh)/stride + 1, (W + 2p - Kw)/stride + 1]
    """
    _require_rank(x, 4, "conv2d input")
    _require_rank(w, 4, "conv2d weight")
    batch, c_in, height, width = x.shape
    c_out, c_in_g, kh, kw = w.shape
    if groups < 1 or c_in % groups != 0:
        raise ShapeError(f"in_channels={c_in} not divisible by groups={groups}")
    if c_out % groups != 0:
        raise ShapeError(f"out_channels={c_out} not divisible by groups={groups}")
    if c_in_g != c_in // groups:
        raise ShapeError(f"weight in_channels={c_in_g} does not match input channels {c_in}/groups={c_in // groups}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"kernel extent must be odd, got {kh}x{kw}")
    if b is not None and b.shape != (c_out,):
        raise ShapeError(f"bias length {b.shape} does not match out_channels={c_out}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"invalid stride={stride} or padding={padding}")
    h_out = (height + 2 * padding - kh) // stride + 1
    w_out = (width + 2 * padding - kw) // stride + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {height}x{width}")

    c_out_g = c_out // groups
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    windows = windows.reshape(batch, groups, c_in_g, h_out, w_out, kh, kw)
    kernel = w.data.reshape(groups, c_out_g, c_in_g, kh, kw)
    out = np.einsum("bgchwij,gocij->bgohw", windows, kernel, optimize=True).reshape(batch, c_out, h_out, w_out)
    if b is not None:
        out = out + b.data.reshape(1, c_out, 1, 1)

    def backward(g):
        g_grouped = g.reshape(batch, groups, c_out_g, h_out, w_out)
        gx = gw = gb = None
        if x.requires_grad:
            gwin = np.einsum("bgohw,gocij->bgchwij", g_grouped, kernel, optimize=True)
            gwin = gwin.reshape(batch, c_in, h_out, w_out, kh, kw)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + stride * (h_out - 1) + 1 : stride, j : j + stride * (w_out - 1) + 1 : stride] += (
                        gwin[..., i, j]
                    )
            gx = gxp[:, :, padding : padding + height, padding : padding + width]
        if w.requires_grad:
            gw = np.einsum("bgohw,bgchwij->gocij", g_grouped, windows, optimize=True).reshape(w.shape)
        if b is not None and b.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gw, gb

    inputs = (x, w) if b is None else (x, w, b)
    return make_result(out, inputs, backward, "conv2d")


# --------------------------------------------------------------- normalisation
def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalise across channels at every (b, h, w) location, then scale and shift"""
    _require_rank(x, 4, "layer_norm input")
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise ShapeError(
            f"layer_norm affine terms must have length C={channels}", details=f"gamma={gamma.shape} beta={beta.shape}"
        )
    if eps <= 0:
        raise ShapeError(f"eps must be positive, got {eps}")

    mean = x.data.mean(axis=1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std
    g_shape = (1, channels, 1, 1)
    out = x_hat * gamma.data.reshape(g_shape) + beta.data.reshape(g_shape)

    def backward(g):
        g_hat = g * gamma.data.reshape(g_shape)
        gx = inv_std * (
            g_hat - g_hat.mean(axis=1, keepdims=True) - x_hat * (g_hat * x_hat).mean(axis=1, keepdims=True)
        )
        return gx, (g * x_hat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3))

    return make_result(out, (x, gamma, beta), backward, "layer_norm")


# ----------------------------------------------------------------- activations
def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max subtraction) along ``axis``"""
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax axis {axis} out of range", details=f"ndim={x.ndim}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (x,), backward, "softmax")


def gelu(x: Tensor) -> Tensor:
    """Exact GELU: x * Phi(x)"""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT_2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)

    def backward(g):
        return (g * (cdf + x.data * pdf),)

    return make_result(x.data * cdf, (x,), backward, "gelu")


# --------------------------------------------------------------------- layout
def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate along ``axis`` (channel axis by default)"""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(t.shape[i] != ref[i] for i in range(len(ref)) if i != ax):
            raise ShapeError(f"concat shape mismatch outside axis {axis}", details=f"{ref} vs {t.shape}")
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=ax))

    return make_result(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), backward, "concat")


def split(x: Tensor, sections: Union[int, Sequence[int]], axis: int = 1) -> List[Tensor]:
    """
    Split along ``axis`` into equal sections (int) or the given sizes (sequence).
    """
    extent = x.shape[axis]
    if isinstance(sections, int):
        if sections < 1 or extent % sections != 0:
            raise ShapeError(f"axis extent {extent} not divisible into {sections} sections")
        sizes = [extent // sections] * sections
    else:
        sizes = list(sections)
        if sum(sizes) != extent:
            raise ShapeError(f"split sizes {sizes} do not sum to axis extent {extent}")
    parts, start = [], 0
    for size in sizes:
        index = [slice(None)] * x.ndim
        index[axis] = slice(start, start + size)
        parts.append(x[tuple(index)])
        start += size
    return parts


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise ShapeError("stack needs identical shapes", details=str(sorted(shapes)))
    out = np.stack([t.data for t in tensors], axis=axis)
    ax = axis % out.ndim

    def backward(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(tensors)))

    return make_result(out, tuple(tensors), backward, "stack")


def take(x: Tensor, indices: np.ndarray, axis: int) -> Tensor:
    """Gather ``indices`` along ``axis``; repeated indices accumulate in backward"""
    indices = np.asarray(indices, dtype=np.intp)
    ax = axis % x.ndim

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(np.moveaxis(full, ax, 0), indices, np.moveaxis(g, ax, 0))
        return (full,)

    return make_result(np.take(x.data, indices, axis=ax), (x,), backward, "take")


def pad2d(x: Tensor, bottom: int, right: int, mode: str = "reflect") -> Tensor:
    """Pad the last two axes at the bottom/right edges (``reflect`` or ``zero``)"""
    if bottom == 0 and right == 0:
        return x
    height, width = x.shape[-2:]
    if mode == "reflect":
        if bottom >= height or right >= width:
            raise ShapeError(f"reflect padding ({bottom}, {right}) must be smaller than extent {height}x{width}")
        rows = np.pad(np.arange(height), (0, bottom), mode="reflect")
        cols = np.pad(np.arange(width), (0, right), mode="reflect")
        return take(take(x, rows, -2), cols, -1)
    if mode == "zero":
        pad_width = [(0, 0)] * (x.ndim - 2) + [(0, bottom), (0, right)]

        def backward(g):
            return (g[..., :height, :width],)

        return make_result(np.pad(x.data, pad_width), (x,), backward, "pad_zero")
    raise ShapeError(f"unknown padding mode {mode!r}")


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """
    Space-to-depth: [B, C, H, W] -> [B, C*r*r, H/r, W/r].

    Output channel ``c*r*r + i*r + j`` holds input pixels ``(i + r*h, j + r*w)``
    of channel ``c``.
    """
    _require_rank(x, 4, "pixel_unshuffle input")
    batch, channels, height, width = x.shape
    if height % r or width % r:
        raise ShapeError(f"spatial extent {height}x{width} not divisible by r={r}")
    y = x.reshape(batch, channels, height // r, r, width // r, r)
    return y.permute(0, 1, 3, 5, 2, 4).reshape(batch, channels * r * r, height // r, width // r)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Depth-to-space, the exact inverse of ``pixel_unshuffle``"""
    _require_rank(x, 4, "pixel_shuffle input")
    batch, channels, height, width = x.shape
    if channels % (r * r):
        raise ShapeError(f"channels={channels} not divisible by r^2={r * r}")
    c = channels // (r * r)
    y = x.reshape(batch, c, r, r, height, width)
    return y.permute(0, 1, 4, 2, 5, 3).reshape(batch, c, height * r, width * r)

