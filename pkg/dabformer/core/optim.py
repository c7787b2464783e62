"""
Optimisation

AdamW with decoupled weight decay, cosine learning-rate annealing and global
gradient-norm clipping.
"""

import logging
import math
from typing import Dict

import numpy as np

from dabformer.core.module import ParamStore
from dabformer.schemas.run_schema import OptimizerConfig
from dabformer.utils.exceptions import CheckpointError

logger = logging.getLogger(__name__)


def cosine_lr(step: int, total: int, lr_init: float, lr_min: float) -> float:
    """lr_min + (lr_init - lr_min) * (1 + cos(pi * t / T)) / 2, held at lr_min after T"""
    t = min(max(step, 0), total)
    return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + math.cos(math.pi * t / total))


def global_grad_norm(params: ParamStore) -> float:
    return math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params.values() if p.grad is not None))


def clip_grad_norm(params: ParamStore, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``; returns the norm before clipping"""
    norm = global_grad_norm(params)
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params.values():
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


class AdamW:
    """
    Adam with decoupled weight decay.

    Decay applies to convolution kernels (rank-4 tensors) only; biases, norm
    terms, wavelengths, temperatures and frequency filters are not decayed.
    """

    def __init__(self, params: ParamStore, config: OptimizerConfig):
        self.params = params
        self.config = config
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self, lr: float) -> None:
        cfg = self.config
        self.step_count += 1
        bias1 = 1.0 - cfg.beta1**self.step_count
        bias2 = 1.0 - cfg.beta2**self.step_count
        for name, p in self.params.items():
            if p.grad is None:
                continue
            if p.ndim == 4 and cfg.weight_decay:
                p.data = p.data * (1.0 - lr * cfg.weight_decay)
            m, v = self.m[name], self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * p.grad
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * p.grad * p.grad
            p.data = p.data - lr * (m / bias1) / (np.sqrt(v / bias2) + cfg.eps)

    # ---------------------------------------------------------- persistence
    def state_tensors(self) -> Dict[str, np.ndarray]:
        state = {"optim.step": np.array([float(self.step_count)])}
        for name in self.params:
            state[f"optim.m.{name}"] = self.m[name]
            state[f"optim.v.{name}"] = self.v[name]
        return state

    def load_state_tensors(self, state: Dict[str, np.ndarray]) -> None:
        if "optim.step" not in state:
            raise CheckpointError("checkpoint carries no optimiser state")
        for name, p in self.params.items():
            for kind, target in (("m", self.m), ("v", self.v)):
                key = f"optim.{kind}.{name}"
                if key not in state or state[key].shape != p.shape:
                    raise CheckpointError(f"optimiser state missing or misshapen for {name}")
                target[name] = np.array(state[key], dtype=np.float64)
        self.step_count = int(state["optim.step"][0])
        logger.debug(f"Restored optimiser state at step {self.step_count}")
