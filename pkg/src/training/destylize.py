"""
Facial destylization and the shared latent optimizer.

destylize recovers a realistic counterpart of a style exemplar S in three steps:
    1. z_e = E(S)
    2. ẑ_e = argmin over z+ of perc(g′(z+), S) + λ_ID·id(g′(z+), S) + ‖σ(z+)‖₁,
       started at z_e; the destylized face is g(ẑ_e)
    3. z_i = E(g(ẑ_e))
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import torch
from tqdm import tqdm

from ..config import DestylizeConfig
from ..errors import ContractViolation, require
from ..losses.objectives import LossSuite, code_dispersion
from ..models.encoder import LatentEncoder
from ..models.synthesis import BaseGenerator
from .common import adam, ensure_finite, ramp_factor, set_lr
from .records import StyleRecord

logger = logging.getLogger(__name__)

# loss_fn(rendered, target, code) -> named weighted terms; the total is their sum
CodeLoss = Callable[[torch.Tensor, torch.Tensor, torch.Tensor], Dict[str, torch.Tensor]]


@dataclass
class LearningRateSchedule:
    """
    Base learning rate with an optional split between structure and color rows,
    and the projector-style warm-up/cool-down ramp.

    Example:
        LearningRateSchedule(0.1, split=3, structure_lr=0.005)
        -> rows [0, 3) at 0.005, rows [3, L) at 0.1
    """
    lr: float
    split: int = 0
    structure_lr: Optional[float] = None
    ramp: bool = True
    rampdown: float = 0.25
    rampup: float = 0.05

    def group_lrs(self) -> List[float]:
        head = self.structure_lr if self.structure_lr is not None else self.lr
        return [head, self.lr]

    def factor(self, step: int, steps: int) -> float:
        if not self.ramp:
            return 1.0
        # shifted by one so the first and last updates are never zero
        return ramp_factor(step + 1, steps + 1, self.rampdown, self.rampup)


@dataclass
class OptimizationResult:
    code: torch.Tensor
    best_loss: float
    initial_loss: float
    trace: List[float] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)


def optimize_code(target: torch.Tensor, model: Callable[[torch.Tensor], torch.Tensor],
                  init: torch.Tensor, loss_fn: CodeLoss, steps: int,
                  schedule: LearningRateSchedule, stage: str = "optimize",
                  metrics=None, progress: bool = False) -> OptimizationResult:
    """
    Minimize loss_fn(model(code), target, code) over the code only.

    Gradients are taken with torch.autograd.grad on the code leaves, so no
    parameter of `model` accumulates a gradient or changes.

    Args:
        target: Target images (B, 3, R, R)
        model: code -> images
        init: Starting code (B, L, D)
        loss_fn: Weighted loss terms
        steps: Number of updates, ≥ 1
        schedule: Learning rates and ramp

    Returns:
        OptimizationResult with the best code seen (the final code included)
        and the monotone best-so-far trace

    Raises:
        ContractViolation: steps ≤ 0
        NumericFailure: non-finite loss
    """
    if steps <= 0:
        raise ContractViolation(f"optimize_code needs steps ≥ 1, got {steps}")
    require(init.dim() == 3, f"optimize_code expects a (B, L, D) code, got {tuple(init.shape)}")
    split = max(0, min(schedule.split, init.shape[1]))

    leaves = [init[:, :split].detach().clone().requires_grad_(True),
              init[:, split:].detach().clone().requires_grad_(True)]
    groups = [{"params": [leaf], "lr": lr}
              for leaf, lr in zip(leaves, schedule.group_lrs()) if leaf.shape[1] > 0]
    active = [group["params"][0] for group in groups]
    base_lrs = [group["lr"] for group in groups]
    optimizer = torch.optim.Adam(groups, betas=(0.9, 0.999))

    def evaluate(step: int):
        code = torch.cat(leaves, dim=1)
        terms = loss_fn(model(code), target, code)
        total = sum(terms.values())
        ensure_finite(step, stage, dict(terms, total=total), "code")
        return code, total, terms

    result: Optional[OptimizationResult] = None
    for step in tqdm(range(steps + 1), desc=stage, disable=not progress):
        code, total, terms = evaluate(step)
        value = float(total.detach())
        if result is None:
            result = OptimizationResult(code.detach().clone(), value, value)
        elif value < result.best_loss:
            result.best_loss = value
            result.code = code.detach().clone()
        result.losses.append(value)
        result.trace.append(result.best_loss)
        if metrics is not None:
            metrics.write(step, stage, total=value,
                          **{k: float(v.detach()) for k, v in terms.items()})
        if step == steps:
            break

        grads = torch.autograd.grad(total, active)
        for leaf, grad in zip(active, grads):
            leaf.grad = grad
        factor = schedule.factor(step, steps)
        set_lr(optimizer, [lr * factor for lr in base_lrs])
        optimizer.step()
        optimizer.zero_grad(set_to_none=True)

    return result


@dataclass
class DestylizeResult:
    """Codes are (1, L, D); images (1, 3, R, R)."""
    z_extrinsic: torch.Tensor
    z_destylized: torch.Tensor
    z_intrinsic: torch.Tensor
    images: Dict[str, torch.Tensor]
    traces: Dict[str, List[float]]

    def to_record(self, index: int, exemplar: torch.Tensor) -> StyleRecord:
        return StyleRecord(
            index=index,
            image=exemplar.reshape(exemplar.shape[-3:]),
            z_extrinsic=self.z_extrinsic[0],
            z_destylized=self.z_destylized[0],
            z_intrinsic=self.z_intrinsic[0],
            stage_images={name: image[0] for name, image in self.images.items()},
        )


def destylization_loss(losses: LossSuite, cfg: DestylizeConfig) -> CodeLoss:
    """Perceptual + λ_ID·identity + (optional) code dispersion."""

    def loss_fn(rendered: torch.Tensor, target: torch.Tensor,
                code: torch.Tensor) -> Dict[str, torch.Tensor]:
        terms = {"perc": losses.perceptual(rendered, target)}
        if cfg.lambda_id > 0:
            terms["id"] = cfg.lambda_id * losses.identity(rendered, target)
        if cfg.use_dispersion:
            terms["dispersion"] = code_dispersion(code)
        return terms

    return loss_fn


def destylize(exemplar: torch.Tensor, encoder: LatentEncoder, g: BaseGenerator,
              g_prime: BaseGenerator, losses: LossSuite, cfg: DestylizeConfig,
              init: Optional[torch.Tensor] = None, metrics=None,
              progress: bool = False) -> DestylizeResult:
    """
    Destylize one exemplar.

    Args:
        exemplar: Style image (3, R, R) or (1, 3, R, R)
        encoder: Trained encoder E
        g: Base generator
        g_prime: Unconditionally fine-tuned copy of g
        losses: Extractor and identity embedder
        cfg: Steps, lr, λ_ID, dispersion switch
        init: Optional Stage-II starting code instead of E(S)

    Returns:
        DestylizeResult

    Raises:
        RefusalError: untrained encoder or embedder
    """
    target = exemplar.reshape(1, *exemplar.shape[-3:])
    with torch.no_grad():
        z_extrinsic = encoder.encode(target)
        naive = g(z_extrinsic)
        stage1_loss = float(losses.perceptual(g_prime(z_extrinsic), target))

    start = z_extrinsic if init is None else init.reshape(z_extrinsic.shape)
    optimized = optimize_code(target, g_prime, start, destylization_loss(losses, cfg),
                              cfg.steps, LearningRateSchedule(cfg.lr), "destylize",
                              metrics, progress)

    with torch.no_grad():
        destylized = g(optimized.code)
        z_intrinsic = encoder.encode(destylized)
        reconstructed = g(z_intrinsic)
        stage3_loss = float(losses.perceptual(reconstructed, destylized))

    return DestylizeResult(
        z_extrinsic=z_extrinsic,
        z_destylized=optimized.code,
        z_intrinsic=z_intrinsic,
        images={"exemplar": target, "stage1": naive, "stage2": destylized,
                "stage3": reconstructed},
        traces={"stage1": [stage1_loss], "stage2": optimized.trace, "stage3": [stage3_loss]},
    )


def destylize_all(exemplars: torch.Tensor, encoder: LatentEncoder, g: BaseGenerator,
                  g_prime: BaseGenerator, losses: LossSuite, cfg: DestylizeConfig,
                  progress: bool = False) -> List[StyleRecord]:
    """Destylize every exemplar in (N, 3, R, R) and wrap the results as records."""
    records = []
    for index in tqdm(range(exemplars.shape[0]), desc="exemplars", disable=not progress):
        result = destylize(exemplars[index], encoder, g, g_prime, losses, cfg)
        records.append(result.to_record(index, exemplars[index]))
        logger.debug("Exemplar %d: stage-2 loss %.4f -> %.4f", index,
                     result.traces["stage2"][0], result.traces["stage2"][-1])
    return records
