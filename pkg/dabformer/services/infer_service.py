"""
Inference Service

This service restores a single image file with a trained checkpoint.
"""

import logging
from pathlib import Path
from typing import Union

from dabformer.core.model import Dabformer
from dabformer.services.eval_service import load_model, model_predictor
from dabformer.utils.constants import MESSAGES, MIN_INPUT_SIZE
from dabformer.utils.exceptions import ShapeError
from dabformer.utils.image_io import read_image, write_image

logger = logging.getLogger(__name__)


class InferService:
    """Service for single-image restoration"""

    def __init__(self, model: Dabformer):
        self.model = model
        self.predict = model_predictor(model)

    @classmethod
    def from_checkpoint(cls, checkpoint: Union[str, Path]) -> "InferService":
        return cls(load_model(checkpoint))

    def restore_file(self, image_in: Union[str, Path], image_out: Union[str, Path]) -> Path:
        """
        Read, pad, forward, crop, clamp to [0, 1] and write.

        Raises:
            ShapeError: Image smaller than 16 pixels on a side
        """
        image = read_image(image_in)
        _, height, width = image.shape
        if height < MIN_INPUT_SIZE or width < MIN_INPUT_SIZE:
            raise ShapeError(MESSAGES["IMAGE_TOO_SMALL"], details=f"{Path(image_in).name} is {width}x{height}")
        restored = self.predict(image[None])[0]
        path = write_image(image_out, restored)
        logger.info(f"Restored {image_in} -> {path} ({width}x{height})")
        return path
