"""
Evaluation Service

This service scores a restoration function per occlusion band: mean PSNR and
SSIM over the full image and over the corrupted region, a CSV report and
side-by-side panels (input | output | ground truth).
"""

import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from dabformer.core.losses import evaluate_pair
from dabformer.core.model import Dabformer
from dabformer.core.tensor import Tensor, no_grad
from dabformer.schemas.model_schema import ModelConfig
from dabformer.schemas.run_schema import CorruptionSpec, DatasetSpec
from dabformer.services.harness import PairDataset
from dabformer.utils.checkpoint import load_checkpoint
from dabformer.utils.constants import EVAL_CSV, MAX_COVERAGE
from dabformer.utils.exceptions import ConfigError
from dabformer.utils.helpers import ensure_dir, mean_ignoring_nan, write_csv
from dabformer.utils.image_io import write_panel

logger = logging.getLogger(__name__)

Predictor = Callable[[np.ndarray], np.ndarray]

EVAL_FIELDS = ["dataset", "band", "images", "psnr", "ssim", "masked_psnr", "masked_ssim"]


def model_predictor(model: Dabformer) -> Predictor:
    """Wrap a model as a batch restoration function with outputs clamped to [0, 1]"""

    def predict(corrupted: np.ndarray) -> np.ndarray:
        with no_grad():
            return np.clip(model(Tensor(corrupted)).data, 0.0, 1.0)

    return predict


def load_model(checkpoint: Union[str, Path], expected: Optional[ModelConfig] = None) -> Dabformer:
    """Rebuild a model from the configuration stored in a checkpoint"""
    ckpt = load_checkpoint(checkpoint, expected=expected)
    model = Dabformer(ckpt.model_config())
    model.load_state_store(ckpt.params())
    return model


def dataset_label(spec: DatasetSpec) -> str:
    return Path(spec.manifest).name if spec.manifest else spec.generator


class EvalService:
    """Service for banded evaluation"""

    def __init__(self, predict: Predictor, output_dir: Union[str, Path], progress: bool = True, panels: bool = True):
        self.predict = predict
        self.output_dir = ensure_dir(output_dir)
        self.progress = progress
        self.panels = panels

    def evaluate_dataset(self, dataset: PairDataset, label: str, band: str) -> Dict[str, float]:
        scores: List[Dict[str, float]] = []
        for index in tqdm(range(len(dataset)), disable=not self.progress, desc=f"eval {label} {band}"):
            pair = dataset.pair(index)
            output = self.predict(pair.corrupted[None])[0]
            scores.append(evaluate_pair(output[None], pair.clean[None], pair.mask))
            if self.panels and index == 0:
                write_panel(self.output_dir / "panels" / f"{label}_{band}.png", [pair.corrupted, output, pair.clean])
        row = {"dataset": label, "band": band, "images": len(scores)}
        for key in ("psnr", "ssim", "masked_psnr", "masked_ssim"):
            row[key] = mean_ignoring_nan(s[key] for s in scores)
        logger.info(
            f"{label} {band}: PSNR {row['psnr']:.2f} SSIM {row['ssim']:.4f} "
            f"masked PSNR {row['masked_psnr']:.2f} masked SSIM {row['masked_ssim']:.4f}"
        )
        return row

    def evaluate(
        self,
        datasets: Sequence[DatasetSpec],
        bands: Sequence[Tuple[float, float]],
        corruption: Optional[CorruptionSpec] = None,
    ) -> List[Dict[str, float]]:
        """
        Evaluate every (dataset, band) combination.

        Manifest datasets carry their own corruption and yield one row each.

        Returns:
            Report rows, also written to ``eval.csv``
        """
        corruption = corruption or CorruptionSpec()
        for low, high in bands:
            if not 0.0 <= low <= high <= MAX_COVERAGE:
                raise ConfigError(f"occlusion band ({low}, {high}) outside [0, {MAX_COVERAGE}]")
        rows = []
        for spec in datasets:
            label = dataset_label(spec)
            if spec.manifest:
                rows.append(self.evaluate_dataset(PairDataset(spec, corruption), label, "manifest"))
                continue
            for low, high in bands:
                band_spec = corruption.model_copy(update={"coverage": (low, high)})
                band = f"{int(round(low * 100))}-{int(round(high * 100))}%"
                rows.append(self.evaluate_dataset(PairDataset(spec, band_spec), label, band))
        path = write_csv(self.output_dir / EVAL_CSV, EVAL_FIELDS, rows)
        logger.info(f"Evaluation report written to {path}")
        return rows
