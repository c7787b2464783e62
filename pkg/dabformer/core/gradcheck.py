"""
Gradient Check

Compares reverse-mode gradients against central finite differences.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from dabformer.core.tensor import Tensor, no_grad
from dabformer.utils.exceptions import GradCheckError

logger = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    """Outcome of one gradient check"""

    max_rel_error: float
    max_abs_error: float
    checked: int
    tolerance: float
    worst: Optional[Tuple[int, Tuple[int, ...]]] = None
    analytic: List[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def _evaluate(f: Callable, inputs: Sequence[Tensor]) -> float:
    with no_grad():
        value = f(*inputs)
    value = float(value.item() if isinstance(value, Tensor) else value)
    if not np.isfinite(value):
        raise GradCheckError("function returned a non-finite value", details=str(value))
    return value


def grad_check(
    f: Callable[..., Tensor],
    x: Union[Tensor, Sequence[Tensor]],
    h: float = 1e-5,
    tol: float = 1e-4,
    max_checks: Optional[int] = None,
    seed: int = 0,
) -> GradCheckReport:
    """
    Check the gradient of a scalar function by central finite differences.

    Args:
        f: Pure, deterministic function returning a single-element tensor; called
            as ``f(x)`` or ``f(*x)`` when ``x`` is a sequence
        x: Tensor or tensors to differentiate with respect to
        h: Finite-difference step
        tol: Maximum accepted relative error
        max_checks: Check only this many coordinates per tensor, sampled with ``seed``
        seed: Sampling seed for ``max_checks``

    Returns:
        GradCheckReport with the maximum relative error over checked coordinates
    """
    inputs = [x] if isinstance(x, Tensor) else list(x)
    saved_flags = [t.requires_grad for t in inputs]
    try:
        for t in inputs:
            t.requires_grad = True
            t.zero_grad()
        out = f(*inputs)
        if not isinstance(out, Tensor) or out.size != 1:
            raise GradCheckError("function must return a single-element tensor")
        if not np.isfinite(out.data).all():
            raise GradCheckError("function returned a non-finite value")
        out.backward()
        analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]
    finally:
        for t, flag in zip(inputs, saved_flags):
            t.requires_grad = flag
            t.zero_grad()

    rng = np.random.default_rng(seed)
    scale = max((float(np.abs(a).max()) for a in analytic if a.size), default=0.0)
    floor = max(1e-8, 1e-3 * scale)
    max_rel = max_abs = 0.0
    worst = None
    checked = 0
    for k, (t, grad) in enumerate(zip(inputs, analytic)):
        t.data = np.ascontiguousarray(t.data)
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_checks is not None and flat.size > max_checks:
            coords = np.sort(rng.choice(flat.size, size=max_checks, replace=False))
        for c in coords:
            original = flat[c]
            flat[c] = original + h
            plus = _evaluate(f, inputs)
            flat[c] = original - h
            minus = _evaluate(f, inputs)
            flat[c] = original
            numeric = (plus - minus) / (2.0 * h)
            exact = grad.reshape(-1)[c]
            abs_err = abs(exact - numeric)
            rel_err = abs_err / max(abs(exact), abs(numeric), floor)
            checked += 1
            max_abs = max(max_abs, abs_err)
            if rel_err > max_rel:
                max_rel = rel_err
                worst = (k, tuple(int(i) for i in np.unravel_index(c, t.shape)))
    report = GradCheckReport(max_rel, max_abs, checked, tol, worst, analytic)
    logger.debug(f"grad_check: {checked} coords, max rel err {max_rel:.3e}")
    return report
