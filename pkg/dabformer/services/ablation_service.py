"""
Ablation Service

This service trains a set of named model variants on the same synthetic corpus
with the same budget and reports validation quality and parameter count per
variant.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from dabformer.schemas.run_schema import RunConfig
from dabformer.services.eval_service import EvalService, model_predictor
from dabformer.services.harness import PairDataset
from dabformer.services.train_service import TrainService
from dabformer.utils.constants import ABLATION_CSV
from dabformer.utils.exceptions import ConfigError
from dabformer.utils.helpers import ensure_dir, write_csv

logger = logging.getLogger(__name__)

ABLATION_FIELDS = ["study", "variant", "params", "final_loss", "psnr", "ssim", "masked_psnr", "masked_ssim"]


@dataclass(frozen=True)
class Variant:
    study: str
    name: str
    model: Dict[str, Any] = field(default_factory=dict)
    loss_terms: Optional[Sequence[str]] = None


VARIANTS = [
    # query path
    Variant("q", "q-plain", {"q_path": "plain"}),
    Variant("q", "q-dwt", {"q_path": "dwt"}),
    Variant("q", "q-gabor", {"q_path": "gabor"}),
    Variant("q", "q-fused", {"q_path": "fused"}),
    # feed-forward
    Variant("ffn", "ffn-plain", {"ffn": "ffn"}),
    Variant("ffn", "ffn-fdagn", {"ffn": "fdagn"}),
    # wavelength
    Variant("lambda", "lambda-fixed", {"gabor_lambda": "fixed:2"}),
    Variant("lambda", "lambda-adaptive", {"gabor_lambda": "adaptive"}),
    # orientation strategy
    Variant("dirs", "dirs-matched", {"gabor_dirs": "matched"}),
    Variant("dirs", "dirs-misaligned", {"gabor_dirs": "misaligned"}),
    Variant("dirs", "dirs-unified-45", {"gabor_dirs": "unified:45"}),
    Variant("dirs", "dirs-random", {"gabor_dirs": "random"}),
    Variant("dirs", "dirs-fused", {"gabor_dirs": "fused"}),
    Variant("dirs", "dirs-conv", {"gabor_dirs": "conv"}),
    # objective
    Variant("losses", "losses-l1", loss_terms=("l1",)),
    Variant("losses", "losses-l1-perceptual", loss_terms=("l1", "perceptual")),
    Variant("losses", "losses-l1-edge", loss_terms=("l1", "edge")),
    Variant("losses", "losses-all", loss_terms=("l1", "perceptual", "edge", "ssim")),
]

STUDIES = tuple(dict.fromkeys(v.study for v in VARIANTS))


def select_variants(studies: Optional[Sequence[str]] = None, names: Optional[Sequence[str]] = None) -> List[Variant]:
    """Variants of the given studies, optionally narrowed to explicit names"""
    studies = list(studies or STUDIES)
    unknown = [s for s in studies if s not in STUDIES]
    if unknown:
        raise ConfigError(f"unknown ablation study {', '.join(unknown)}", details=f"choose from {', '.join(STUDIES)}")
    chosen = [v for v in VARIANTS if v.study in studies]
    if names:
        known = {v.name for v in VARIANTS}
        missing = [n for n in names if n not in known]
        if missing:
            raise ConfigError(f"unknown ablation variant {', '.join(missing)}")
        chosen = [v for v in VARIANTS if v.name in names]
    return chosen


def variant_run(base: RunConfig, variant: Variant, output_dir: Path) -> RunConfig:
    """Apply a variant to the base run; the model is re-validated"""
    data = base.model_dump()
    data["model"].update(variant.model)
    data["output_dir"] = str(output_dir)
    if variant.loss_terms is not None:
        data["loss_terms"] = list(variant.loss_terms)
    try:
        return RunConfig.model_validate(data)
    except ValueError as e:
        raise ConfigError(f"variant {variant.name} is invalid", details=str(e)) from e


class AblationService:
    """Service for desk-scale ablation studies"""

    def __init__(self, run: RunConfig, output_dir: Optional[Union[str, Path]] = None, progress: bool = True):
        self.run = run
        self.output_dir = ensure_dir(output_dir or run.output_dir)
        self.progress = progress

    def run_variant(self, variant: Variant) -> Dict[str, Any]:
        variant_dir = self.output_dir / variant.name
        run = variant_run(self.run, variant, variant_dir)
        logger.info(f"Ablation variant {variant.name} ({variant.study})")
        trainer = TrainService(run, output_dir=variant_dir, progress=self.progress)
        result = trainer.train()
        evaluator = EvalService(model_predictor(trainer.model), variant_dir, progress=self.progress, panels=False)
        scores = evaluator.evaluate_dataset(PairDataset(run.val_dataset, run.corruption), "val", "train-band")
        return {
            "study": variant.study,
            "variant": variant.name,
            "params": trainer.model.num_parameters(),
            "final_loss": result.final_loss,
            **{k: scores[k] for k in ("psnr", "ssim", "masked_psnr", "masked_ssim")},
        }

    def run_all(self, variants: Sequence[Variant]) -> List[Dict[str, Any]]:
        """
        Train and score every variant, writing ``ablation.csv``.

        Returns:
            One report row per variant, in the given order
        """
        rows = [self.run_variant(v) for v in variants]
        path = write_csv(self.output_dir / ABLATION_CSV, ABLATION_FIELDS, rows)
        logger.info("=" * 60)
        for row in rows:
            logger.info(f"  {row['variant']:22s} params={row['params']:9d} PSNR={row['psnr']:.2f} SSIM={row['ssim']:.4f}")
        logger.info("=" * 60)
        logger.info(f"Ablation report written to {path}")
        return rows
