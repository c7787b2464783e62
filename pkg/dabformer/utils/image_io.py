"""
Image I/O

8-bit PNG and binary PPM (P6) reading and writing. Images are float64 arrays
[3, H, W] with values in [0, 1].
"""

import logging
from pathlib import Path
from typing import Sequence, Union

import imageio.v3 as iio
import numpy as np

from dabformer.utils.constants import IMAGE_EXTENSIONS
from dabformer.utils.exceptions import ImageFormatError

logger = logging.getLogger(__name__)


def _check_extension(path: Path) -> None:
    if path.suffix.lower() not in IMAGE_EXTENSIONS:
        raise ImageFormatError(f"unsupported image format {path.suffix!r}", details=f"expected one of {IMAGE_EXTENSIONS}")


def to_uint8(image: np.ndarray) -> np.ndarray:
    """[3, H, W] in [0, 1] -> [H, W, 3] uint8, rounding halves up"""
    clipped = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    return np.floor(clipped * 255.0 + 0.5).astype(np.uint8).transpose(1, 2, 0)


def from_uint8(pixels: np.ndarray) -> np.ndarray:
    """[H, W], [H, W, 3] or [H, W, 4] uint8 -> [3, H, W] float64"""
    if pixels.dtype != np.uint8:
        raise ImageFormatError(f"only 8-bit images are supported, got {pixels.dtype}")
    if pixels.ndim == 2:
        pixels = np.repeat(pixels[..., None], 3, axis=-1)
    elif pixels.ndim == 3 and pixels.shape[-1] == 4:
        pixels = pixels[..., :3]
    if pixels.ndim != 3 or pixels.shape[-1] != 3:
        raise ImageFormatError("expected a grayscale, RGB or RGBA image", details=f"shape={pixels.shape}")
    return pixels.transpose(2, 0, 1).astype(np.float64) / 255.0


def read_image(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    _check_extension(path)
    if not path.is_file():
        raise ImageFormatError(f"image not found: {path}")
    try:
        pixels = iio.imread(path)
    except Exception as e:
        raise ImageFormatError(f"could not decode {path.name}", details=str(e)) from e
    return from_uint8(np.asarray(pixels))


def write_image(path: Union[str, Path], image: np.ndarray) -> Path:
    path = Path(path)
    _check_extension(path)
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ImageFormatError("expected an image of shape [3, H, W]", details=f"shape={image.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    iio.imwrite(path, to_uint8(image))
    return path


def write_panel(path: Union[str, Path], images: Sequence[np.ndarray], gap: int = 2) -> Path:
    """Side-by-side panel (e.g. input | output | ground truth) with white separators"""
    height = images[0].shape[1]
    separator = np.ones((3, height, gap))
    columns = []
    for i, image in enumerate(images):
        if i:
            columns.append(separator)
        columns.append(np.asarray(image))
    return write_image(path, np.concatenate(columns, axis=2))
