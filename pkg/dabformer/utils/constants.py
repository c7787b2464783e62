"""
Application Constants

This module contains library-wide constants.
"""

import math

# Tensor core
LAYER_NORM_EPS = 1e-6
INIT_STD = 0.02

# Gabor filters
GABOR_SIGMA = 2.0 * math.pi
GABOR_PSI = 0.0
GABOR_GAMMA = 0.5
GABOR_KSIZE = 7
LAMBDA_INIT = 2.0
LAMBDA_MIN = 0.1
LAMBDA_MAX = 8.0
FUSED_DIRECTIONS_DEG = (0.0, 30.0, 45.0, 90.0, 180.0)

# Model
PAD_MULTIPLE = 16
MIN_INPUT_SIZE = 16
EXPANSION_RATIO = 2.66
PATCH_SIZE = 8
REFERENCE_PARAMS = 29.73e6  # full-scale parameter count reported for the architecture

# Losses
DEFAULT_LOSS_WEIGHTS = {"l1": 10.0, "perceptual": 0.6, "edge": 0.4, "ssim": 0.5}
LOSS_TERMS = ("l1", "perceptual", "edge", "ssim")
SOBEL_EPS = 1e-8
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2

# Checkpoints
CHECKPOINT_MAGIC = b"DABF"
CHECKPOINT_VERSION = 1
BUFFER_PREFIX = "buffer."

# Harness
MAX_COVERAGE = 0.9
RAIN_ANGLE_JITTER_DEG = 10.0
RAIN_INTENSITY = (0.2, 0.8)
IMAGE_EXTENSIONS = (".png", ".ppm")

# Output file names
METRICS_CSV = "metrics.csv"
EVAL_CSV = "eval.csv"
BENCH_CSV = "bench.csv"
ABLATION_CSV = "ablation.csv"
CHECKPOINT_NAME = "checkpoint.dabf"
NAN_DUMP = "nan_dump.json"

# Messages
MESSAGES = {
    "NON_FINITE_LOSS": "Loss became non-finite",
    "HASH_MISMATCH": "Checkpoint was written for a different model configuration",
    "CORRUPT_CONFIG": "Checkpoint configuration does not match its stored hash",
    "BAD_MAGIC": "Not a checkpoint file (bad magic)",
    "TRUNCATED": "Checkpoint file is truncated",
    "IMAGE_TOO_SMALL": "Image must be at least 16 pixels on each side",
}
