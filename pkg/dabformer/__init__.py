"""
Dabformer - frequency-aware transformer for image restoration

This package contains a numpy autodiff engine, the network built on it, the
training objective, a synthetic data harness and the command-line services.
"""

__version__ = "0.1.0"
