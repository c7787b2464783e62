"""
Modules and Parameter Store

Small module system in the style of ``torch.nn.Module``: attributes that are
``Parameter`` or ``Module`` instances register themselves, and the model's
learnables are exposed as an ordered ``ParamStore``.
"""

import logging
from collections import OrderedDict
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import truncnorm

from dabformer.core import ops
from dabformer.core.tensor import Tensor
from dabformer.utils.constants import BUFFER_PREFIX, INIT_STD
from dabformer.utils.exceptions import NonFiniteError, ShapeError

logger = logging.getLogger(__name__)


class Parameter(Tensor):
    """Learnable leaf tensor"""

    def __init__(self, data, name: Optional[str] = None):
        super().__init__(data, requires_grad=True, name=name)


class Buffer(Tensor):
    """Persistent non-learnable tensor, saved with the parameters"""

    def __init__(self, data, name: Optional[str] = None):
        super().__init__(data, requires_grad=False, name=name)


class ParamStore(OrderedDict):
    """Ordered map name -> Tensor; every name registered exactly once"""

    def add(self, name: str, tensor: Tensor) -> None:
        if name in self:
            raise ShapeError(f"duplicate parameter name {name!r}")
        self[name] = tensor

    def count(self) -> int:
        return param_count(self)


def param_count(params: Dict[str, Tensor]) -> int:
    """Exact number of scalar learnables in a store"""
    return int(sum(t.size for t in params.values()))


def trunc_normal(rng: np.random.Generator, shape: Tuple[int, ...], std: float = INIT_STD) -> np.ndarray:
    """Normal(0, std) truncated at two standard deviations"""
    return truncnorm.rvs(-2.0, 2.0, loc=0.0, scale=std, size=shape, random_state=rng)


class Module:
    """Base class for every layer"""

    def __init__(self):
        object.__setattr__(self, "_parameters", OrderedDict())
        object.__setattr__(self, "_modules", OrderedDict())
        object.__setattr__(self, "_buffers", OrderedDict())
        object.__setattr__(self, "_path", "")

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._parameters[name] = value
        elif isinstance(value, Buffer):
            self._buffers[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        try:
            return self.forward(*args, **kwargs)
        except NonFiniteError as e:
            if e.layer is None:
                e.layer = self._path or type(self).__name__
                e.message = f"{e.message} in layer {e.layer}"
                e.args = (e.message,)
            raise

    # -------------------------------------------------------------- traversal
    def named_modules(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        yield prefix, self
        for name, child in self._modules.items():
            yield from child.named_modules(f"{prefix}.{name}" if prefix else name)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, module in self.named_modules(prefix):
            for pname, param in module._parameters.items():
                yield (f"{name}.{pname}" if name else pname), param

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, Buffer]]:
        for name, module in self.named_modules(prefix):
            for bname, buffer in module._buffers.items():
                yield (f"{name}.{bname}" if name else bname), buffer

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def param_store(self) -> ParamStore:
        store = ParamStore()
        for name, param in self.named_parameters():
            store.add(name, param)
        return store

    def state_store(self) -> ParamStore:
        """Parameters plus buffers, the latter under the ``buffer.`` prefix"""
        store = self.param_store()
        for name, buffer in self.named_buffers():
            store.add(BUFFER_PREFIX + name, buffer)
        return store

    def assign_paths(self) -> None:
        """Record dotted module paths used in error messages"""
        for name, module in self.named_modules():
            object.__setattr__(module, "_path", name or type(module).__name__)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def load_param_store(self, store: Dict[str, Tensor]) -> None:
        """Copy values from ``store`` into this module's parameters (names and shapes must match)"""
        own = self.param_store()
        missing = sorted(set(own) - set(store))
        unexpected = sorted(set(store) - set(own))
        if missing or unexpected:
            raise ShapeError("parameter names do not match", details=f"missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, param in own.items():
            value = store[name].data if isinstance(store[name], Tensor) else np.asarray(store[name])
            if value.shape != param.shape:
                raise ShapeError(f"shape mismatch for {name}: {value.shape} vs {param.shape}")
            param.data = np.array(value, dtype=np.float64)

    def load_state_store(self, store: Dict[str, Tensor]) -> None:
        """Load parameters and buffers written by ``state_store``"""
        params = {k: v for k, v in store.items() if not k.startswith(BUFFER_PREFIX)}
        buffers = {k[len(BUFFER_PREFIX) :]: v for k, v in store.items() if k.startswith(BUFFER_PREFIX)}
        self.load_param_store(params)
        own = dict(self.named_buffers())
        if set(own) != set(buffers):
            missing = sorted(set(own) - set(buffers))
            unexpected = sorted(set(buffers) - set(own))
            raise ShapeError("buffer names do not match", details=f"missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, buffer in own.items():
            value = np.asarray(getattr(buffers[name], "data", buffers[name]), dtype=np.float64)
            if value.shape != buffer.shape:
                raise ShapeError(f"shape mismatch for buffer {name}: {value.shape} vs {buffer.shape}")
            buffer.data = value.copy()

    def num_parameters(self) -> int:
        return param_count(self.param_store())


class ModuleList(Module):
    """Ordered container of sub-modules"""

    def __init__(self, modules: Sequence[Module] = ()):
        super().__init__()
        self._items: List[Module] = []
        for module in modules:
            self.append(module)

    def append(self, module: Module) -> None:
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, index):
        return self._items[index]


# --------------------------------------------------------------------- layers
class Conv2d(Module):
    """Zero-padded 2D convolution with 'same' output for stride 1"""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        groups: int = 1,
        bias: bool = True,
        stride: int = 1,
    ):
        super().__init__()
        if kernel_size % 2 == 0:
            raise ShapeError(f"kernel_size must be odd, got {kernel_size}")
        self.stride = stride
        self.padding = kernel_size // 2
        self.groups = groups
        self.weight = Parameter(trunc_normal(rng, (out_channels, in_channels // groups, kernel_size, kernel_size)))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class LayerNorm2d(Module):
    """Channel layer normalisation with neutral affine init"""

    def __init__(self, channels: int, eps: float = 1e-6):
        super().__init__()
        self.eps = eps
        self.weight = Parameter(np.ones(channels))
        self.bias = Parameter(np.zeros(channels))

    def forward(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.weight, self.bias, self.eps)


class DepthwiseSeparableConv2d(Module):
    """k x k depthwise convolution followed by a 1x1 pointwise convolution"""

    def __init__(
        self, in_channels: int, out_channels: int, rng: np.random.Generator, kernel_size: int = 3, bias: bool = True
    ):
        super().__init__()
        self.depthwise = Conv2d(in_channels, in_channels, kernel_size, rng, groups=in_channels, bias=bias)
        self.pointwise = Conv2d(in_channels, out_channels, 1, rng, bias=bias)

    def forward(self, x: Tensor) -> Tensor:
        return self.pointwise(self.depthwise(x))
