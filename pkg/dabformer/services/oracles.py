"""
Reference Oracles

Independent, loop-based evaluations used to cross-check the vectorised
operators (by the ``verify`` command and by the tests). Everything here works
on plain numpy arrays and python scalars, never on the autodiff graph.
"""

import math
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np

from dabformer.utils.constants import GABOR_GAMMA, GABOR_PSI, GABOR_SIGMA, LAMBDA_MAX, LAMBDA_MIN, SSIM_C1


def gabor_point(x: float, y: float, wavelength: float, theta: float, psi: float, sigma: float, gamma: float) -> float:
    """Scalar Gabor value at offset (x, y)"""
    xr = x * math.cos(theta) + y * math.sin(theta)
    yr = -x * math.sin(theta) + y * math.cos(theta)
    envelope = math.exp(-(xr * xr + gamma * gamma * yr * yr) / (2.0 * sigma * sigma))
    return envelope * math.cos(2.0 * math.pi * xr / wavelength + psi)


def gabor_kernel_loop(ksize: int, wavelength: float, theta: float, psi: float, sigma: float, gamma: float) -> np.ndarray:
    r = (ksize - 1) // 2
    out = np.zeros((ksize, ksize))
    for row in range(ksize):
        for col in range(ksize):
            out[row, col] = gabor_point(col - r, row - r, wavelength, theta, psi, sigma, gamma)
    return out


def haar_loop(image: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Haar subbands of a 2D array, one 2x2 block at a time"""
    height, width = image.shape
    bands = [np.zeros((height // 2, width // 2)) for _ in range(4)]
    for i in range(height // 2):
        for j in range(width // 2):
            a = image[2 * i, 2 * j]
            b = image[2 * i + 1, 2 * j]
            c = image[2 * i, 2 * j + 1]
            d = image[2 * i + 1, 2 * j + 1]
            bands[0][i, j] = (a + b + c + d) / 2.0
            bands[1][i, j] = (a - b + c - d) / 2.0
            bands[2][i, j] = (a + b - c - d) / 2.0
            bands[3][i, j] = (a - b - c + d) / 2.0
    return tuple(bands)


def dft2_brute(image: np.ndarray) -> np.ndarray:
    """Half-spectrum DFT of a 2D array by direct summation"""
    height, width = image.shape
    out = np.zeros((height, width // 2 + 1), dtype=np.complex128)
    for u in range(height):
        for v in range(width // 2 + 1):
            total = 0.0 + 0.0j
            for m in range(height):
                for n in range(width):
                    total += image[m, n] * complex(
                        math.cos(-2.0 * math.pi * (u * m / height + v * n / width)),
                        math.sin(-2.0 * math.pi * (u * m / height + v * n / width)),
                    )
            out[u, v] = total
    return out


def circular_conv_loop(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Periodic 2D convolution, out[i, j] = sum x[m, n] k[(i - m) % H, (j - n) % W]"""
    height, width = image.shape
    out = np.zeros_like(image)
    for i in range(height):
        for j in range(width):
            out[i, j] = sum(
                image[m, n] * kernel[(i - m) % height, (j - n) % width] for m in range(height) for n in range(width)
            )
    return out


def conv2d_loop(
    x: np.ndarray, w: np.ndarray, b: Union[np.ndarray, None] = None, stride: int = 1, padding: int = 0, groups: int = 1
) -> np.ndarray:
    batch, c_in, height, width = x.shape
    c_out, c_in_g, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out_h = (height + 2 * padding - kh) // stride + 1
    out_w = (width + 2 * padding - kw) // stride + 1
    out = np.zeros((batch, c_out, out_h, out_w))
    per_group_out = c_out // groups
    for n in range(batch):
        for o in range(c_out):
            g = o // per_group_out
            for i in range(out_h):
                for j in range(out_w):
                    total = 0.0 if b is None else float(b[o])
                    for ci in range(c_in_g):
                        for p in range(kh):
                            for q in range(kw):
                                total += w[o, ci, p, q] * xp[n, g * c_in_g + ci, i * stride + p, j * stride + q]
                    out[n, o, i, j] = total
    return out


def gelu_scalar(v: float) -> float:
    return 0.5 * v * (1.0 + math.erf(v / math.sqrt(2.0)))


def layer_norm_loop(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float) -> np.ndarray:
    out = np.zeros_like(x)
    batch, channels, height, width = x.shape
    for n in range(batch):
        for i in range(height):
            for j in range(width):
                column = [x[n, c, i, j] for c in range(channels)]
                mean = sum(column) / channels
                var = sum((v - mean) ** 2 for v in column) / channels
                for c in range(channels):
                    out[n, c, i, j] = (column[c] - mean) / math.sqrt(var + eps) * gamma[c] + beta[c]
    return out


def softmax_rows(m: np.ndarray) -> np.ndarray:
    out = np.zeros_like(m)
    for r in range(m.shape[0]):
        peak = max(m[r])
        exps = [math.exp(v - peak) for v in m[r]]
        total = sum(exps)
        out[r] = [e / total for e in exps]
    return out


def _conv(module, x: np.ndarray) -> np.ndarray:
    bias = None if module.bias is None else module.bias.data
    return conv2d_loop(x, module.weight.data, bias, module.stride, module.padding, module.groups)


def fdfa_reference(fdfa, x: np.ndarray, residual: bool = True) -> np.ndarray:
    """
    Step-by-step FDFA forward for a fused-query module with one head.

    Gabor kernels are rebuilt with ``gabor_kernel_loop`` from the module's
    wavelengths; every convolution goes through ``conv2d_loop``.
    """
    fusion = fdfa.query_path
    bank = fusion.bank
    batch, channels, height, width = x.shape
    subbands = [[haar_loop(x[n, c]) for c in range(channels)] for n in range(batch)]
    ll_all = np.array([[subbands[n][c][0] for c in range(channels)] for n in range(batch)])
    ll_out = _conv(fusion.ll_path.pointwise, _conv(fusion.ll_path.depthwise, ll_all))

    kernels = {}
    for index, name in enumerate(("hl", "lh", "hh")):
        wavelength = bank.wavelength(name)
        wavelength = float(np.asarray(getattr(wavelength, "data", wavelength)))
        wavelength = min(max(wavelength, LAMBDA_MIN), LAMBDA_MAX)
        kernels[index + 1] = np.mean(
            [
                gabor_kernel_loop(bank.ksize, wavelength, theta, GABOR_PSI, GABOR_SIGMA, GABOR_GAMMA)
                for theta in bank.orientations[name]
            ],
            axis=0,
        )

    fused = np.zeros_like(x)
    for n in range(batch):
        for c in range(channels):
            details = [
                conv2d_loop(subbands[n][c][i][None, None], kernels[i][None, None], padding=bank.ksize // 2)[0, 0]
                for i in (1, 2, 3)
            ]
            fused[n, c] = _inverse_haar(ll_out[n, c], *details)

    q = _conv(fdfa.q_proj, fused)
    k = _conv(fdfa.k_dw, _conv(fdfa.k_proj, x))
    v = _conv(fdfa.v_dw, _conv(fdfa.v_proj, x))
    xi = float(fdfa.temperature.data.reshape(-1)[0])
    out = np.zeros_like(x)
    for n in range(batch):
        qm = q[n].reshape(channels, -1)
        km = k[n].reshape(channels, -1)
        vm = v[n].reshape(channels, -1)
        logits = np.array([[sum(qm[i] * km[j]) / xi for j in range(channels)] for i in range(channels)])
        attn = softmax_rows(logits)
        out[n] = (attn @ vm).reshape(channels, height, width)
    projected = _conv(fdfa.out_proj, out)
    return projected + x if residual else projected


def _inverse_haar(ll: np.ndarray, hl: np.ndarray, lh: np.ndarray, hh: np.ndarray) -> np.ndarray:
    h, w = ll.shape
    out = np.zeros((2 * h, 2 * w))
    for i in range(h):
        for j in range(w):
            out[2 * i, 2 * j] = (ll[i, j] + hl[i, j] + lh[i, j] + hh[i, j]) / 2.0
            out[2 * i + 1, 2 * j] = (ll[i, j] - hl[i, j] + lh[i, j] - hh[i, j]) / 2.0
            out[2 * i, 2 * j + 1] = (ll[i, j] + hl[i, j] - lh[i, j] - hh[i, j]) / 2.0
            out[2 * i + 1, 2 * j + 1] = (ll[i, j] - hl[i, j] - lh[i, j] + hh[i, j]) / 2.0
    return out


def sobel_loop(image: np.ndarray, eps: float) -> np.ndarray:
    """Zero-padded Sobel magnitude of a 2D array"""
    kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    height, width = image.shape
    padded = np.pad(image, 1)
    out = np.zeros_like(image)
    for i in range(height):
        for j in range(width):
            gx = sum(kx[p][q] * padded[i + p, j + q] for p in range(3) for q in range(3))
            gy = sum(kx[q][p] * padded[i + p, j + q] for p in range(3) for q in range(3))
            out[i, j] = math.sqrt(gx * gx + gy * gy + eps)
    return out


def l1_loop(a: np.ndarray, b: np.ndarray) -> float:
    flat_a, flat_b = a.reshape(-1), b.reshape(-1)
    return sum(abs(float(p) - float(q)) for p, q in zip(flat_a, flat_b)) / flat_a.size


def perceptual_loop(o: np.ndarray, gt: np.ndarray, stages: Sequence[Tuple[np.ndarray, np.ndarray]]) -> float:
    total = 0.0
    fo, fg = o, gt
    for w, b in stages:
        fo = np.vectorize(gelu_scalar)(conv2d_loop(fo, w, b, stride=2, padding=1))
        fg = np.vectorize(gelu_scalar)(conv2d_loop(fg, w, b, stride=2, padding=1))
        total += l1_loop(fo, fg)
    return total


def ssim_constant_images() -> float:
    """SSIM of an all-0 image against an all-1 image: C1 / (1 + C1)"""
    return SSIM_C1 / (1.0 + SSIM_C1)


def parse_ppm(path: Union[str, Path]) -> np.ndarray:
    """
    Minimal binary PPM (P6, maxval 255) parser; returns [H, W, 3] uint8.

    Header tokens are whitespace separated, ``#`` starts a comment up to the end
    of the line, and exactly one whitespace byte precedes the raster.
    """
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P6":
        raise ValueError(f"not a P6 file: {tokens[0]!r}")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    pos += 1
    raster = data[pos : pos + width * height * 3]
    if len(raster) != width * height * 3:
        raise ValueError("truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
