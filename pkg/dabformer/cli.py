"""
Command-Line Interface

Subcommands: train, eval, infer, verify, bench, ablate.

Every command accepts ``--profile`` (desk, full, testing) and most accept
``--config PATH`` with a flat ``key = value`` file plus flag overrides.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from dabformer.config.loader import load_run_config, parse_value
from dabformer.main import CommandContext, create_context, handle_errors
from dabformer.schemas.run_schema import DatasetSpec, RunConfig
from dabformer.services.ablation_service import STUDIES, AblationService, select_variants
from dabformer.services.bench_service import BenchService
from dabformer.services.eval_service import EvalService, load_model, model_predictor
from dabformer.services.infer_service import InferService
from dabformer.services.train_service import TrainService
from dabformer.services.verify_service import SUITES, VerifyService
from dabformer.utils.decorators import log_command
from dabformer.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

# flag destination -> dotted config key
FLAG_KEYS = {
    "q_path": "model.q_path",
    "ffn": "model.ffn",
    "gabor_dirs": "model.gabor_dirs",
    "gabor_lambda": "model.gabor_lambda",
    "base_channels": "model.base_channels",
    "losses": "loss_terms",
    "seed": "seed",
    "iterations": "schedule.iterations",
    "batch_size": "batch_size",
    "output": "output_dir",
    "manifest": "dataset.manifest",
}


def parse_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Collect run-config overrides from the flags present on ``args``"""
    overrides: Dict[str, Any] = {}
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if dest == "losses":
            value = [term.strip() for term in value.split(",") if term.strip()]
        overrides[key] = value
    for item in getattr(args, "set", None) or []:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = parse_value(raw)
    return overrides


def parse_bands(raw: str) -> List[tuple]:
    bands = []
    for item in raw.split(","):
        value = parse_value(item)
        if not isinstance(value, tuple):
            raise ConfigError(f"occlusion band must look like 0.2-0.3, got {item!r}")
        bands.append(value)
    return bands


def load_run(args: argparse.Namespace, ctx: CommandContext) -> RunConfig:
    return load_run_config(getattr(args, "config", None), parse_overrides(args), profile=ctx.profile)


@log_command
def cmd_train(args: argparse.Namespace, ctx: CommandContext) -> int:
    run = load_run(args, ctx)
    trainer = TrainService(run, progress=ctx.progress)
    logger.info(trainer.model.summary_table())
    result = trainer.train(resume=args.resume)
    logger.info("=" * 60)
    logger.info(f"Iterations: {result.iterations}")
    logger.info(f"Final loss: {result.final_loss:.5f}")
    logger.info(f"Final train PSNR: {result.final_psnr:.2f} dB")
    logger.info(f"Checkpoint: {result.checkpoint}")
    logger.info(f"Metrics: {result.metrics}")
    logger.info("=" * 60)
    return 0


@log_command
def cmd_eval(args: argparse.Namespace, ctx: CommandContext) -> int:
    run = load_run(args, ctx)
    model = load_model(args.checkpoint, expected=run.model if args.config else None)
    if args.eval_manifest:
        datasets = [DatasetSpec(manifest=path) for path in args.eval_manifest]
    else:
        datasets = [run.val_dataset]
    bands = parse_bands(args.bands) if args.bands else run.eval_bands
    service = EvalService(model_predictor(model), run.output_dir, progress=ctx.progress, panels=not args.no_panels)
    rows = service.evaluate(datasets, bands, run.corruption)
    logger.info(f"{len(rows)} report rows")
    return 0


@log_command
def cmd_infer(args: argparse.Namespace, ctx: CommandContext) -> int:
    InferService.from_checkpoint(args.checkpoint).restore_file(args.image_in, args.image_out)
    return 0


@log_command
def cmd_verify(args: argparse.Namespace, ctx: CommandContext) -> int:
    results = VerifyService(seed=args.seed or 0, suites=args.suite).run()
    logger.info("=" * 60)
    for suite in dict.fromkeys(r.suite for r in results):
        mine = [r for r in results if r.suite == suite]
        logger.info(f"  {suite:<13} {sum(r.passed for r in mine)}/{len(mine)}")
    logger.info("=" * 60)
    return 0 if all(r.passed for r in results) else 1


@log_command
def cmd_bench(args: argparse.Namespace, ctx: CommandContext) -> int:
    service = BenchService(
        args.output or ctx.output_dir,
        heads=args.heads,
        repeats=args.repeats,
        forward=not args.no_forward,
        seed=args.seed or 0,
    )
    report = service.run()
    logger.info(f"Scaling: {report.summary()}")
    logger.info(f"Report: {report.path}")
    return 0


@log_command
def cmd_ablate(args: argparse.Namespace, ctx: CommandContext) -> int:
    run = load_run(args, ctx)
    variants = select_variants(args.study, args.variant)
    AblationService(run, progress=ctx.progress).run_all(variants)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--profile", choices=["desk", "full", "testing", "default"], help="Configuration profile")
    parser.add_argument("--log-level", help="Log level (default: from the profile)")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Flat key = value config file")
    parser.add_argument("--q-path", dest="q_path", choices=["plain", "dwt", "gabor", "fused"], help="Query path")
    parser.add_argument("--ffn", choices=["ffn", "fdagn"], help="Feed-forward variant")
    parser.add_argument("--gabor-dirs", help="matched | misaligned | unified:<deg> | random | fused | conv")
    parser.add_argument("--gabor-lambda", help="adaptive | fixed:<value>")
    parser.add_argument("--base-channels", type=int, help="Width of the first level")
    parser.add_argument("--losses", help="Comma-separated subset of l1,perceptual,edge,ssim")
    parser.add_argument("--seed", type=int, help="Random seed (DABFORMER_SEED still wins)")
    parser.add_argument("--iterations", type=int, help="Training iterations")
    parser.add_argument("--batch-size", type=int, help="Batch size")
    parser.add_argument("--output", help="Output directory")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="Any dotted config key")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dabformer", description="Frequency-aware transformer for image restoration")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Train a model")
    _add_common(train)
    _add_run_flags(train)
    train.add_argument("--manifest", help="Train on a manifest of image pairs")
    train.add_argument("--resume", help="Checkpoint to continue from")
    train.set_defaults(handler=cmd_train)

    evaluate = sub.add_parser("eval", help="Evaluate a checkpoint per occlusion band")
    _add_common(evaluate)
    _add_run_flags(evaluate)
    evaluate.add_argument("--checkpoint", required=True, help="Checkpoint file")
    evaluate.add_argument("--manifest", dest="eval_manifest", action="append", help="Manifest dataset (repeatable)")
    evaluate.add_argument("--bands", help="Occlusion bands, e.g. 0.2-0.3,0.3-0.4")
    evaluate.add_argument("--no-panels", action="store_true", help="Skip PNG panels")
    evaluate.set_defaults(handler=cmd_eval)

    infer = sub.add_parser("infer", help="Restore one image")
    _add_common(infer)
    infer.add_argument("checkpoint", help="Checkpoint file")
    infer.add_argument("image_in", help="Input image (.png or .ppm)")
    infer.add_argument("image_out", help="Output image (.png or .ppm)")
    infer.set_defaults(handler=cmd_infer)

    verify = sub.add_parser("verify", help="Run the oracle suites")
    _add_common(verify)
    verify.add_argument("--suite", action="append", choices=list(SUITES), help="Suite to run (repeatable)")
    verify.add_argument("--seed", type=int, help="Seed for random inputs")
    verify.set_defaults(handler=cmd_verify)

    bench = sub.add_parser("bench", help="Attention scaling benchmark")
    _add_common(bench)
    bench.add_argument("--output", help="Output directory")
    bench.add_argument("--heads", type=int, default=1, help="Attention heads (default: 1)")
    bench.add_argument("--repeats", type=int, default=3, help="Timed runs per point (default: 3)")
    bench.add_argument("--no-forward", action="store_true", help="Time only the attention core")
    bench.add_argument("--seed", type=int, help="Seed for weights and inputs")
    bench.set_defaults(handler=cmd_bench)

    ablate = sub.add_parser("ablate", help="Train and compare ablation variants")
    _add_common(ablate)
    _add_run_flags(ablate)
    ablate.add_argument("--study", action="append", choices=list(STUDIES), help="Study to run (repeatable)")
    ablate.add_argument("--variant", action="append", help="Single variant by name (repeatable)")
    ablate.set_defaults(handler=cmd_ablate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, build the context and run one command"""
    args = build_parser().parse_args(argv)

    @handle_errors
    def run() -> int:
        ctx = create_context(args.profile, args.log_level)
        return args.handler(args, ctx)

    return run()


if __name__ == "__main__":
    sys.exit(main())
