"""
Gradient verification harness.
Compares reverse-mode gradients against central finite differences
(f(θ+eps) - f(θ-eps)) / (2·eps), one scalar parameter at a time.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict

import torch

from ..errors import NumericFailure
from .store import ParameterStore

logger = logging.getLogger(__name__)


@dataclass
class GradReport:
    """Outcome of a gradient check."""
    per_parameter: Dict[str, float] = field(default_factory=dict)
    max_relative_error: float = 0.0
    passed: bool = True
    eps: float = 1e-4
    threshold: float = 1e-3


def _relative_error(analytic: float, numeric: float, floor: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(loss_fn: Callable[[ParameterStore], torch.Tensor],
               params: ParameterStore,
               eps: float = 1e-4,
               threshold: float = 1e-3,
               max_entries: int = 24,
               floor: float = 1e-5,
               seed: int = 0) -> GradReport:
    """
    Check analytic gradients of a scalar loss.

    Args:
        loss_fn: Deterministic function of a ParameterStore returning a scalar tensor
        params: Parameters to perturb; converted to float64
        eps: Finite-difference step
        threshold: Pass threshold on the max relative error
        max_entries: Scalars checked per tensor (random subset for large tensors)
        floor: Lower bound on the relative-error denominator
        seed: Subsampling seed

    Returns:
        GradReport with per-parameter max relative error
    """
    work = ParameterStore({k: v.detach().to(torch.float64).clone().requires_grad_(True)
                           for k, v in params.items()})

    loss = loss_fn(work)
    if not torch.isfinite(loss).all():
        raise NumericFailure("non-finite loss in grad_check",
                             {"parameters": work.keys()})
    names = work.keys()
    grads = torch.autograd.grad(loss, [work[k] for k in names], allow_unused=True)

    generator = torch.Generator().manual_seed(seed)
    report = GradReport(eps=eps, threshold=threshold)

    for name, grad in zip(names, grads):
        tensor = work[name]
        if grad is None:
            grad = torch.zeros_like(tensor)
        flat = tensor.data.view(-1)
        count = flat.numel()
        if count > max_entries:
            indices = torch.randperm(count, generator=generator)[:max_entries].tolist()
        else:
            indices = range(count)

        worst = 0.0
        for index in indices:
            original = flat[index].item()
            with torch.no_grad():
                flat[index] = original + eps
                upper = loss_fn(work).item()
                flat[index] = original - eps
                lower = loss_fn(work).item()
                flat[index] = original
            if not (abs(upper) < float("inf") and abs(lower) < float("inf")):
                raise NumericFailure("non-finite loss while perturbing",
                                     {"parameter": name, "index": index})
            numeric = (upper - lower) / (2 * eps)
            analytic = grad.view(-1)[index].item()
            worst = max(worst, _relative_error(analytic, numeric, floor))

        report.per_parameter[name] = worst
        report.max_relative_error = max(report.max_relative_error, worst)

    report.passed = report.max_relative_error < threshold
    logger.debug("grad_check max relative error %.3e over %d tensors",
                 report.max_relative_error, len(names))
    return report
