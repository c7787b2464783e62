"""
Training Service

This service runs the optimisation loop: cosine-annealed AdamW on the weighted
objective, periodic CSV metrics and checkpoints, and bit-identical resume.
"""

import itertools
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from tqdm import tqdm

from dabformer.core.losses import FeatureExtractor, psnr, total_loss
from dabformer.core.model import Dabformer
from dabformer.core.optim import AdamW, clip_grad_norm, cosine_lr
from dabformer.core.tensor import Tensor
from dabformer.schemas.run_schema import RunConfig
from dabformer.services.harness import PairDataset, Prefetcher, stack_batch
from dabformer.utils.checkpoint import load_checkpoint, save_checkpoint
from dabformer.utils.constants import CHECKPOINT_NAME, LOSS_TERMS, MESSAGES, METRICS_CSV, NAN_DUMP
from dabformer.utils.exceptions import NonFiniteError
from dabformer.utils.helpers import CsvLog, ensure_dir, format_timestamp

logger = logging.getLogger(__name__)

METRIC_FIELDS = ["iter", "loss", *LOSS_TERMS, "lr", "grad_norm", "train_psnr"]


@dataclass
class TrainResult:
    checkpoint: Path
    metrics: Path
    iterations: int
    final_loss: float
    final_psnr: float


def build_extractor(run: RunConfig) -> FeatureExtractor:
    if run.perceptual_weights:
        return FeatureExtractor.from_npz(run.perceptual_weights)
    return FeatureExtractor.proxy(seed=0)


class TrainService:
    """Service for training one model configuration"""

    def __init__(self, run: RunConfig, output_dir: Optional[Union[str, Path]] = None, progress: bool = True):
        """
        Initialize training service.

        Args:
            run: Validated run configuration
            output_dir: Where metrics and checkpoints go (defaults to ``run.output_dir``)
            progress: Show a tqdm progress bar
        """
        self.run = run
        self.output_dir = ensure_dir(output_dir or run.output_dir)
        self.progress = progress
        self.model = Dabformer(run.model, seed=run.seed)
        self.params = self.model.param_store()
        self.optimizer = AdamW(self.params, run.optimizer)
        self.extractor = build_extractor(run)
        self.dataset = PairDataset(run.dataset, run.corruption)
        self.start_iteration = 0

    @property
    def checkpoint_path(self) -> Path:
        return self.output_dir / CHECKPOINT_NAME

    def resume(self, path: Union[str, Path]) -> int:
        """Restore parameters, optimiser moments and the iteration counter"""
        checkpoint = load_checkpoint(path, expected=self.run.model)
        self.model.load_state_store(checkpoint.params())
        extras = checkpoint.extras()
        self.optimizer.load_state_tensors(extras)
        self.start_iteration = int(extras.get("train.iteration", np.zeros(1))[0])
        logger.info(f"Resuming from {path} at iteration {self.start_iteration}")
        return self.start_iteration

    def save(self, iteration: int) -> Path:
        tensors = dict(self.model.state_store())
        tensors.update(self.optimizer.state_tensors())
        tensors["train.iteration"] = np.array([float(iteration)])
        return save_checkpoint(self.checkpoint_path, self.run.model, tensors)

    def _dump_non_finite(self, iteration: int, error: NonFiniteError, components: Dict[str, float]) -> Path:
        path = self.output_dir / NAN_DUMP
        stats = {
            name: {"min": float(np.nanmin(p.data)), "max": float(np.nanmax(p.data)), "finite": bool(np.isfinite(p.data).all())}
            for name, p in self.params.items()
        }
        dump = {
            "timestamp": format_timestamp(),
            "iteration": iteration,
            "error": str(error),
            "layer": error.layer,
            "components": components,
            "parameters": stats,
        }
        path.write_text(json.dumps(dump, indent=2))
        logger.error(f"Non-finite values at iteration {iteration}; diagnostics written to {path}")
        return path

    def step(self, iteration: int, corrupted: np.ndarray, clean: np.ndarray) -> Dict[str, float]:
        """One optimisation step; returns the CSV row"""
        run = self.run
        lr = cosine_lr(iteration, run.schedule.iterations, run.optimizer.lr, run.schedule.lr_min)
        components: Dict[str, float] = {}
        try:
            self.optimizer.zero_grad()
            output = self.model(Tensor(corrupted))
            loss = total_loss(output, clean, run.loss_weights, self.extractor, run.loss_terms)
            components = loss.components
            if not np.isfinite(loss.total.item()):
                raise NonFiniteError(MESSAGES["NON_FINITE_LOSS"], details=f"iteration {iteration}")
            loss.total.backward()
        except NonFiniteError as e:
            self._dump_non_finite(iteration, e, components)
            raise
        grad_norm = clip_grad_norm(self.params, run.optimizer.clip_norm)
        self.optimizer.step(lr)
        row = {"iter": iteration + 1, "loss": loss.total.item(), "lr": lr, "grad_norm": grad_norm}
        row.update(components)
        row["train_psnr"] = psnr(np.clip(output.data, 0.0, 1.0), clean)
        return row

    def train(self, resume: Optional[Union[str, Path]] = None) -> TrainResult:
        """
        Run until ``schedule.iterations`` optimiser steps have been taken.

        Args:
            resume: Optional checkpoint to continue from

        Returns:
            TrainResult with output paths and the last logged values
        """
        if resume is not None:
            self.resume(resume)
        run = self.run
        total = run.schedule.iterations
        metrics = CsvLog(self.output_dir / METRICS_CSV, METRIC_FIELDS, append=resume is not None)
        stream = itertools.islice(self.dataset.stream(run.batch_size), self.start_iteration, None)
        batches = Prefetcher(stream, depth=run.prefetch)
        row = {"loss": float("nan"), "train_psnr": float("nan")}
        iteration = self.start_iteration
        try:
            with tqdm(total=total, initial=iteration, disable=not self.progress, desc="train") as bar:
                while iteration < total:
                    _, batch = next(batches)
                    corrupted, clean, _ = stack_batch(batch)
                    row = self.step(iteration, corrupted, clean)
                    iteration += 1
                    bar.update(1)
                    if iteration % run.log_every == 0 or iteration == total:
                        metrics.write(row)
                        logger.info(
                            f"iter {iteration}/{total} loss={row['loss']:.5f} "
                            f"psnr={row['train_psnr']:.2f} lr={row['lr']:.3e}"
                        )
                    if iteration % run.checkpoint_every == 0 and iteration < total:
                        self.save(iteration)
        finally:
            batches.close()
        self.save(iteration)
        return TrainResult(self.checkpoint_path, metrics.path, iteration, row["loss"], row["train_psnr"])
