"""
Core Package

This package contains the tensor engine, the network layers and the training
objective. Import the network itself from ``dabformer.core.model``.
"""

from .module import Module, Parameter, param_count
from .tensor import Tensor, no_grad

__all__ = ["Tensor", "no_grad", "Module", "Parameter", "param_count"]
