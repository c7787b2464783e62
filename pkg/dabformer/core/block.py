"""
Transformer Block

Pre-norm residual composition of the attention and feed-forward stages:
x~ = x + FDFA(norm(x)); x' = x~ + FDAGN(norm(x~)).
"""

import numpy as np

from dabformer.core.fdagn import FDAGN, FdagnConfig
from dabformer.core.fdfa import FDFA, FdfaConfig
from dabformer.core.module import LayerNorm2d, Module
from dabformer.core.tensor import Tensor
from dabformer.utils.constants import LAYER_NORM_EPS


class DabformerBlock(Module):
    def __init__(self, attention: FdfaConfig, feed_forward: FdagnConfig, rng: np.random.Generator):
        super().__init__()
        self.norm1 = LayerNorm2d(attention.channels, LAYER_NORM_EPS)
        self.attn = FDFA(attention, rng)
        self.norm2 = LayerNorm2d(feed_forward.channels, LAYER_NORM_EPS)
        self.ffn = FDAGN(feed_forward, rng)

    def attention_term(self, x: Tensor) -> Tensor:
        return self.attn(self.norm1(x), residual=False)

    def feed_forward_term(self, x: Tensor) -> Tensor:
        return self.ffn(self.norm2(x))

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.attention_term(x)
        return x + self.feed_forward_term(x)
